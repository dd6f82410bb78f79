"""Ground-truth grid world: scene loading, collision stepping, four-view rendering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable

import numpy as np

from ._kernels import clear_until, first_hits
from .geometry import (
    DIRECTION_OFFSET_DEG,
    DIRECTIONS,
    CameraIntrinsics,
    LowLevelAction,
    Pose,
    WorldPoint,
    apply_low_level,
    bearing_to_column,
    sector_of,
    view_heading,
    world_to_pixel,
    wrap_deg,
)

AGENT_RADIUS_M = 0.20
RAY_STEP_FRACTION = 0.25  # ray-march sample spacing, in cells


class SceneError(ValueError):
    """Scene or episode document failed validation."""


class Task(str, Enum):
    OBJECT_NAV = "ObjectNav"
    SIMPLE = "Simple"
    ABSTRACT = "Abstract"
    STEP_BY_STEP = "StepByStep"


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    category: str
    position: WorldPoint
    radius: float = 0.0


@dataclass(frozen=True)
class Room:
    name: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def perimeter(self, spacing: float) -> np.ndarray:
        """Boundary sample points, shape (n, 2)."""
        pts = []
        nx = max(1, int(round((self.xmax - self.xmin) / spacing)))
        ny = max(1, int(round((self.ymax - self.ymin) / spacing)))
        xs = np.linspace(self.xmin, self.xmax, nx + 1)
        ys = np.linspace(self.ymin, self.ymax, ny + 1)
        pts.extend((x, self.ymin) for x in xs)
        pts.extend((x, self.ymax) for x in xs)
        pts.extend((self.xmin, y) for y in ys[1:-1])
        pts.extend((self.xmax, y) for y in ys[1:-1])
        return np.asarray(pts, dtype=float)


@dataclass(frozen=True, eq=False)
class SceneMap:
    resolution: float
    width: int
    height: int
    occupied: np.ndarray  # bool, shape (height, width); row = y, col = x
    objects: tuple[ObjectInstance, ...] = ()
    rooms: tuple[Room, ...] = ()
    name: str = ""

    @property
    def extent(self) -> tuple[float, float]:
        return self.width * self.resolution, self.height * self.resolution

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(y / self.resolution)), int(math.floor(x / self.resolution))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (col + 0.5) * self.resolution, (row + 0.5) * self.resolution

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def is_free(self, x: float, y: float) -> bool:
        r, c = self.cell_of(x, y)
        return self.in_bounds(r, c) and not self.occupied[r, c]

    def categories(self) -> list[str]:
        """Sorted object-category vocabulary."""
        return sorted({o.category for o in self.objects})

    def room_names(self) -> list[str]:
        return [r.name for r in self.rooms]

    def disc_clear(self, x: float, y: float, radius: float = AGENT_RADIUS_M) -> bool:
        return not _disc_hits(self, np.array([[x, y]]), radius)


@dataclass(frozen=True)
class EpisodeSpec:
    id: str
    task: Task
    instruction: str
    target_categories: tuple[str, ...]
    start: Pose
    landmark_categories: tuple[str, ...] = ()
    scene: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "task": self.task.value,
            "instruction": self.instruction,
            "target_categories": list(self.target_categories),
            "landmark_categories": list(self.landmark_categories),
            "start": {"x": self.start.x, "y": self.start.y, "heading": self.start.heading},
            "scene": self.scene,
        }


@dataclass(frozen=True)
class VisibleObject:
    id: str
    category: str
    first_col: int
    last_col: int
    range: float


@dataclass(frozen=True)
class VisibleRoom:
    name: str
    point: WorldPoint  # nearest visible boundary point
    column: int
    range: float


@dataclass(frozen=True, eq=False)
class DirectionalView:
    direction: str
    depth: np.ndarray  # range per column, max_range where nothing is hit
    visible: tuple[VisibleObject, ...]
    pose: Pose
    intrinsics: CameraIntrinsics
    visible_rooms: tuple[VisibleRoom, ...] = ()


# ---------------------------------------------------------------- loading


def _as_document(doc: bytes | str | dict) -> dict:
    if isinstance(doc, dict):
        return doc
    try:
        data = json.loads(doc.decode("utf-8") if isinstance(doc, (bytes, bytearray)) else doc)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SceneError(f"malformed document: {exc}") from exc
    if not isinstance(data, dict):
        raise SceneError("scene document must be a single object")
    return data


def load_scene(scene_document: bytes | str | dict) -> SceneMap:
    """Parse and validate a scene document. Border cells are always marked occupied."""
    data = _as_document(scene_document)
    try:
        resolution = float(data["resolution"])
        width = int(data["width"])
        height = int(data["height"])
        occupied_cells = data.get("occupied", [])
        raw_objects = data.get("objects", [])
        raw_rooms = data.get("rooms", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"malformed scene document: {exc!r}") from exc
    if not resolution > 0:
        raise SceneError("resolution must be positive")
    if width < 3 or height < 3:
        raise SceneError("scene must be at least 3x3 cells")

    occ = np.zeros((height, width), dtype=bool)
    for entry in occupied_cells:
        try:
            r, c = int(entry[0]), int(entry[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise SceneError(f"bad occupied entry {entry!r}") from exc
        if not (0 <= r < height and 0 <= c < width):
            raise SceneError(f"occupied cell {entry!r} outside grid")
        occ[r, c] = True
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    occ.setflags(write=False)

    xmax, ymax = width * resolution, height * resolution
    objects = []
    seen_ids = set()
    for o in raw_objects:
        try:
            obj = ObjectInstance(
                id=str(o["id"]),
                category=str(o["category"]).strip().lower(),
                position=WorldPoint(float(o["x"]), float(o["y"])),
                radius=float(o.get("radius", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed object {o!r}: {exc}") from exc
        if not obj.category:
            raise SceneError(f"object {obj.id} has empty category")
        if obj.radius < 0:
            raise SceneError(f"object {obj.id} has negative radius")
        if obj.id in seen_ids:
            raise SceneError(f"duplicate object id {obj.id}")
        seen_ids.add(obj.id)
        if not (0 <= obj.position.x < xmax and 0 <= obj.position.y < ymax):
            raise SceneError(f"object {obj.id} at {obj.position} outside map bounds")
        r, c = int(obj.position.y // resolution), int(obj.position.x // resolution)
        if occ[r, c]:
            raise SceneError(f"object {obj.id} sits on an occupied cell")
        objects.append(obj)

    rooms = []
    for rm in raw_rooms:
        try:
            room = Room(
                name=str(rm["name"]).strip().lower(),
                xmin=float(rm["xmin"]),
                ymin=float(rm["ymin"]),
                xmax=float(rm["xmax"]),
                ymax=float(rm["ymax"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed room {rm!r}: {exc}") from exc
        if not room.name:
            raise SceneError("room with empty name")
        if not (room.xmax > room.xmin and room.ymax > room.ymin):
            raise SceneError(f"room {room.name} has zero or negative area")
        if room.xmin < 0 or room.ymin < 0 or room.xmax > xmax or room.ymax > ymax:
            raise SceneError(f"room {room.name} outside map bounds")
        rooms.append(room)

    return SceneMap(
        resolution=resolution,
        width=width,
        height=height,
        occupied=occ,
        objects=tuple(objects),
        rooms=tuple(rooms),
        name=str(data.get("name", "")),
    )


def scene_to_document(scene: SceneMap) -> dict:
    rows, cols = np.nonzero(scene.occupied)
    return {
        "name": scene.name,
        "resolution": scene.resolution,
        "width": scene.width,
        "height": scene.height,
        "occupied": [[int(r), int(c)] for r, c in zip(rows, cols)],
        "objects": [
            {"id": o.id, "category": o.category, "x": o.position.x, "y": o.position.y, "radius": o.radius}
            for o in scene.objects
        ],
        "rooms": [
            {"name": r.name, "xmin": r.xmin, "ymin": r.ymin, "xmax": r.xmax, "ymax": r.ymax}
            for r in scene.rooms
        ],
    }


def episode_from_dict(d: dict) -> EpisodeSpec:
    try:
        start = d["start"]
        ep = EpisodeSpec(
            id=str(d["id"]),
            task=Task(d["task"]),
            instruction=str(d["instruction"]),
            target_categories=tuple(str(t).strip().lower() for t in d["target_categories"]),
            landmark_categories=tuple(str(t).strip().lower() for t in d.get("landmark_categories", [])),
            start=Pose(float(start["x"]), float(start["y"]), float(start.get("heading", 0.0))),
            scene=str(d.get("scene", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"malformed episode {d!r}: {exc}") from exc
    if not ep.target_categories:
        raise SceneError(f"episode {ep.id} has no target categories")
    if not ep.instruction.strip():
        raise SceneError(f"episode {ep.id} has an empty instruction")
    return ep


def load_episodes(document: bytes | str | list, scene: SceneMap | None = None) -> list[EpisodeSpec]:
    if isinstance(document, (bytes, bytearray, str)):
        try:
            raw = json.loads(document.decode("utf-8") if isinstance(document, (bytes, bytearray)) else document)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SceneError(f"malformed episode file: {exc}") from exc
    else:
        raw = document
    if not isinstance(raw, list):
        raise SceneError("episode file must be a list")
    episodes = [episode_from_dict(d) for d in raw]
    if scene is not None:
        for ep in episodes:
            validate_start(scene, ep)
    return episodes


def validate_start(scene: SceneMap, episode: EpisodeSpec) -> None:
    if not scene.is_free(episode.start.x, episode.start.y):
        raise SceneError(f"episode {episode.id}: start is not on a free cell")
    if not scene.disc_clear(episode.start.x, episode.start.y):
        raise SceneError(f"episode {episode.id}: agent disc at start overlaps an obstacle")


# ---------------------------------------------------------------- stepping


def _disc_hits(scene: SceneMap, points: np.ndarray, radius: float) -> bool:
    """Whether a disc at any of ``points`` overlaps an occupied (or out-of-map) cell."""
    res = scene.resolution
    lo = np.floor((points.min(axis=0) - radius) / res).astype(int)
    hi = np.floor((points.max(axis=0) + radius) / res).astype(int)
    if lo[0] < 0 or lo[1] < 0 or hi[0] >= scene.width or hi[1] >= scene.height:
        return True
    block = scene.occupied[lo[1] : hi[1] + 1, lo[0] : hi[0] + 1]
    rows, cols = np.nonzero(block)
    if rows.size == 0:
        return False
    cx = (cols + lo[0] + 0.5) * res
    cy = (rows + lo[1] + 0.5) * res
    dx = np.maximum(np.abs(points[:, 0:1] - cx[None, :]) - res / 2.0, 0.0)
    dy = np.maximum(np.abs(points[:, 1:2] - cy[None, :]) - res / 2.0, 0.0)
    return bool(np.any(dx * dx + dy * dy < radius * radius))


def step(
    scene: SceneMap, pose: Pose, action: LowLevelAction, agent_radius: float = AGENT_RADIUS_M
) -> tuple[Pose, bool]:
    """Apply one low-level action; a blocked forward move leaves the pose unchanged."""
    action = LowLevelAction(action)
    new_pose = apply_low_level(pose, action)
    if action is not LowLevelAction.FORWARD:
        return new_pose, False
    n = max(2, int(math.ceil((new_pose.distance_to(pose.x, pose.y)) / (scene.resolution / 2.0))))
    ts = np.arange(1, n + 1) / n
    pts = np.stack(
        [pose.x + ts * (new_pose.x - pose.x), pose.y + ts * (new_pose.y - pose.y)], axis=1
    )
    if _disc_hits(scene, pts, agent_radius):
        return pose, True
    return new_pose, False


# ---------------------------------------------------------------- rendering


def ray_sample_distances(max_range: float, resolution: float) -> np.ndarray:
    """Distances at which rays are sampled; shared by rendering and map updates."""
    spacing = resolution * RAY_STEP_FRACTION
    # every sample stays strictly below max_range, so depth == max_range means "no hit"
    n = int(math.ceil(max_range / spacing)) - 1
    ts = (np.arange(n) + 1) * spacing
    return ts[ts < max_range]


def view_column_angles(pose: Pose, direction: str, intrinsics: CameraIntrinsics) -> np.ndarray:
    base = view_heading(pose, direction)
    u = np.arange(intrinsics.image_width, dtype=float)
    rel = np.degrees(np.arctan2(intrinsics.image_width / 2.0 - u, intrinsics.focal_px))
    return np.radians(base + rel)


def _line_of_sight(scene: SceneMap, pose: Pose, targets: np.ndarray, ranges: np.ndarray, ts: np.ndarray, margin: float) -> np.ndarray:
    """True where every sample strictly closer than ``range - margin`` lies in free space."""
    if len(targets) == 0:
        return np.zeros(0, dtype=bool)
    angles = np.arctan2(targets[:, 1] - pose.y, targets[:, 0] - pose.x)
    spacing = scene.resolution * RAY_STEP_FRACTION
    limits = np.asarray(ranges, dtype=float) - margin
    return clear_until(scene.occupied, pose.x, pose.y, angles, spacing, len(ts), scene.resolution, limits)


def depth_scan(occupied: np.ndarray, resolution: float, pose: Pose, direction: str, intrinsics: CameraIntrinsics):
    """(column angles, first-hit sample index per column, sample distances) for one view."""
    ts = ray_sample_distances(intrinsics.max_range, resolution)
    angles = view_column_angles(pose, direction, intrinsics)
    hits = first_hits(occupied, pose.x, pose.y, angles, resolution * RAY_STEP_FRACTION, len(ts), resolution)
    return angles, hits, ts


def render_views(
    scene: SceneMap, pose: Pose, intrinsics: CameraIntrinsics | None = None
) -> dict[str, DirectionalView]:
    """Depth scan plus visible objects and rooms for the four body-relative views."""
    intrinsics = intrinsics or CameraIntrinsics()
    ts = ray_sample_distances(intrinsics.max_range, scene.resolution)
    width = intrinsics.image_width

    depth_by_dir = {}
    for d in DIRECTIONS:
        _, hits, _ = depth_scan(scene.occupied, scene.resolution, pose, d, intrinsics)
        padded = np.append(ts, intrinsics.max_range)
        depth = padded[hits]
        depth.setflags(write=False)
        depth_by_dir[d] = depth

    # objects: center-only occlusion test
    objs = [o for o in scene.objects]
    visible: dict[str, list[VisibleObject]] = {d: [] for d in DIRECTIONS}
    if objs:
        centers = np.array([[o.position.x, o.position.y] for o in objs])
        ranges = np.hypot(centers[:, 0] - pose.x, centers[:, 1] - pose.y)
        clear = _line_of_sight(scene, pose, centers, ranges, ts, margin=0.0)
        for o, rng, ok in zip(objs, ranges, clear):
            if not ok or rng > intrinsics.max_range:
                continue
            rng = max(float(rng), 1e-6)
            world_bearing = math.degrees(math.atan2(o.position.y - pose.y, o.position.x - pose.x))
            rel = wrap_deg(world_bearing - pose.heading)
            direction = sector_of(rel) if rng > 1e-6 else "front"
            local = wrap_deg(rel - DIRECTION_OFFSET_DEG[direction])
            half = math.degrees(math.asin(min(1.0, o.radius / rng))) if o.radius > 0 else 0.0
            hi_b = min(local + half, 45.0)
            lo_b = max(local - half, -45.0 + 1e-9)
            u_lo = bearing_to_column(hi_b, intrinsics)
            u_hi = bearing_to_column(lo_b, intrinsics)
            first_col = max(0, int(math.ceil(u_lo - 1e-12)))
            last_col = min(width - 1, int(math.floor(u_hi + 1e-12)))
            if first_col > last_col:
                mid = min(width - 1, max(0, int(round(bearing_to_column(local, intrinsics)))))
                first_col = last_col = mid
            visible[direction].append(VisibleObject(o.id, o.category, first_col, last_col, rng))

    rooms_vis: dict[str, list[VisibleRoom]] = {d: [] for d in DIRECTIONS}
    for room in scene.rooms:
        pts = room.perimeter(scene.resolution)
        ranges = np.hypot(pts[:, 0] - pose.x, pts[:, 1] - pose.y)
        ok = (ranges <= intrinsics.max_range) & (ranges > 1e-6)
        clear = _line_of_sight(scene, pose, pts, ranges, ts, margin=scene.resolution)
        ok &= clear
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        best = idx[np.argmin(ranges[idx])]
        point = WorldPoint(float(pts[best, 0]), float(pts[best, 1]))
        proj = world_to_pixel(point, pose, intrinsics)
        if proj is None:
            continue
        direction, u, rng = proj
        rooms_vis[direction].append(VisibleRoom(room.name, point, min(width - 1, int(u)), rng))

    views = {}
    for d in DIRECTIONS:
        vis = tuple(sorted(visible[d], key=lambda v: (v.range, v.category, v.id)))
        rv = tuple(sorted(rooms_vis[d], key=lambda v: (v.range, v.name)))
        views[d] = DirectionalView(d, depth_by_dir[d], vis, pose, intrinsics, rv)
    return views


def iter_visible(views: dict[str, DirectionalView]) -> Iterable[tuple[str, VisibleObject]]:
    for d in DIRECTIONS:
        for v in views[d].visible:
            yield d, v
