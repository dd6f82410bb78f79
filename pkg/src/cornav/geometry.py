"""Poses, low-level motion and pinhole back-projection on the ground plane."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

FORWARD_STEP_M = 0.20
TURN_STEP_DEG = 15.0

DIRECTIONS = ("front", "left", "right", "rear")
DIRECTION_OFFSET_DEG = {"front": 0.0, "left": 90.0, "right": 270.0, "rear": 180.0}


class LowLevelAction(str, Enum):
    FORWARD = "MoveForward"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"

    @property
    def short(self) -> str:
        return {"MoveForward": "F", "TurnLeft": "L", "TurnRight": "R"}[self.value]

    @classmethod
    def from_short(cls, code: str) -> "LowLevelAction":
        return {"F": cls.FORWARD, "L": cls.TURN_LEFT, "R": cls.TURN_RIGHT}[code]


def normalize_deg(angle: float) -> float:
    a = math.fmod(angle, 360.0)
    if a < 0.0:
        a += 360.0
    # fmod of a tiny negative can round up to exactly 360
    return 0.0 if a >= 360.0 else a


def wrap_deg(angle: float) -> float:
    """Wrap to (-180, 180]."""
    a = normalize_deg(angle)
    return a - 360.0 if a > 180.0 else a


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0  # degrees CCW from +x

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose: {self}")
        object.__setattr__(self, "heading", normalize_deg(self.heading))

    def distance_to(self, x: float, y: float) -> float:
        return math.hypot(x - self.x, y - self.y)


@dataclass(frozen=True)
class WorldPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point: {self}")


@dataclass(frozen=True)
class CameraIntrinsics:
    horizontal_fov: float = 90.0
    image_width: int = 128
    image_height: int = 1
    max_range: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.horizontal_fov < 180.0:
            raise ValueError("horizontal_fov must be in (0, 180)")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be >= 1")
        if not self.max_range > 0.0:
            raise ValueError("max_range must be > 0")

    @property
    def focal_px(self) -> float:
        return (self.image_width / 2.0) / math.tan(math.radians(self.horizontal_fov / 2.0))


def view_heading(pose: Pose, view_direction: str) -> float:
    if view_direction not in DIRECTION_OFFSET_DEG:
        raise ValueError(f"unknown view direction {view_direction!r}")
    return normalize_deg(pose.heading + DIRECTION_OFFSET_DEG[view_direction])


def column_bearing(pixel_u: float, intrinsics: CameraIntrinsics) -> float:
    """Bearing (degrees, CCW positive) of a column relative to the optical axis.

    Column ``width / 2`` is on-axis; column 0 sits at ``+fov / 2`` (left edge).
    Fractional columns are allowed.
    """
    return math.degrees(math.atan2(intrinsics.image_width / 2.0 - pixel_u, intrinsics.focal_px))


def bearing_to_column(bearing_deg: float, intrinsics: CameraIntrinsics) -> float:
    return intrinsics.image_width / 2.0 - intrinsics.focal_px * math.tan(math.radians(bearing_deg))


def pixel_to_world(
    pixel_u: float,
    range_m: float,
    pose: Pose,
    view_direction: str,
    intrinsics: CameraIntrinsics,
) -> WorldPoint:
    """Back-project a depth pixel to the ground plane.

    ``range_m`` is the Euclidean ray length, not planar depth.
    """
    if not 0 <= pixel_u < intrinsics.image_width:
        raise ValueError(f"pixel_u {pixel_u} outside [0, {intrinsics.image_width})")
    if not range_m > 0.0:
        raise ValueError(f"range must be positive, got {range_m}")
    theta = math.radians(view_heading(pose, view_direction) + column_bearing(pixel_u, intrinsics))
    return WorldPoint(pose.x + range_m * math.cos(theta), pose.y + range_m * math.sin(theta))


def sector_of(bearing_deg: float) -> str:
    """Which view sees a body-relative bearing. Sectors are (-45, 45] etc."""
    b = wrap_deg(bearing_deg)
    if -45.0 < b <= 45.0:
        return "front"
    if 45.0 < b <= 135.0:
        return "left"
    if -135.0 < b <= -45.0:
        return "right"
    return "rear"


def world_to_pixel(
    point: WorldPoint, pose: Pose, intrinsics: CameraIntrinsics
) -> tuple[str, float, float] | None:
    """Project a world point to (view, fractional column, range); None if out of range."""
    dx, dy = point.x - pose.x, point.y - pose.y
    rng = math.hypot(dx, dy)
    if rng == 0.0 or rng > intrinsics.max_range:
        return None
    rel = wrap_deg(math.degrees(math.atan2(dy, dx)) - pose.heading)
    view = sector_of(rel)
    local = wrap_deg(rel - DIRECTION_OFFSET_DEG[view])
    u = bearing_to_column(local, intrinsics)
    w = intrinsics.image_width
    if w <= u < w + 1e-9:
        # a point on the seam between two views can round onto the far edge
        u = math.nextafter(float(w), 0.0)
    if not 0 <= u < w:
        return None
    return view, u, rng


def apply_low_level(pose: Pose, action: LowLevelAction) -> Pose:
    action = LowLevelAction(action)
    if action is LowLevelAction.TURN_LEFT:
        return Pose(pose.x, pose.y, pose.heading + TURN_STEP_DEG)
    if action is LowLevelAction.TURN_RIGHT:
        return Pose(pose.x, pose.y, pose.heading - TURN_STEP_DEG)
    theta = math.radians(pose.heading)
    return Pose(
        pose.x + FORWARD_STEP_M * math.cos(theta),
        pose.y + FORWARD_STEP_M * math.sin(theta),
        pose.heading,
    )
