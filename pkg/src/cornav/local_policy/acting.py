"""Acting module: ground a global action, then drive there with FMM replanning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..actions import GlobalAction, MoveToDirection, MoveToObject, MoveToRoom, Stop
from ..geometry import (
    DIRECTION_OFFSET_DEG,
    FORWARD_STEP_M,
    LowLevelAction,
    Pose,
    WorldPoint,
)
from ..perception import Detection, Sensor
from ..world import AGENT_RADIUS_M, SceneMap, step
from .control import WAYPOINT_REACHED_M, next_low_level
from .fmm import descend, fmm_arrival, planning_passable
from .mapping import OccupancyGrid, update_occupancy

log = logging.getLogger(__name__)


REGROUND_RADIUS_M = 0.5


class TargetNotDetected(LookupError):
    pass


@dataclass(frozen=True)
class ActingConfig:
    threshold: float = 1.5
    # navigate this much closer than the success threshold so localisation
    # error does not flip a reached goal into a failed check
    approach_margin: float = 0.5
    direction_distance: float = 1.5
    # a margin over the body radius absorbs the 15 degree heading quantisation
    inflation: float = AGENT_RADIUS_M + 0.1
    reperceive_every: int = 5
    max_consecutive_collisions: int = 3
    lookahead: float = 1.0

    @property
    def goal_radius(self) -> float:
        return max(self.threshold - self.approach_margin, WAYPOINT_REACHED_M)


@dataclass
class ExecutionOutcome:
    reached: bool
    final_pose: Pose
    traveled: float = 0.0
    steps: int = 0
    grounded: WorldPoint | None = None
    low_level: list[str] = field(default_factory=list)
    collisions: int = 0
    failure: str | None = None
    requested_distance: float | None = None


def ground_target(name: str, detections: Sequence[Detection]) -> Detection | None:
    """Objects before rooms; nearest estimated range wins."""
    for kind in ("object", "room"):
        hits = [d for d in detections if d.kind == kind and (d.category == name or d.matched_query == name)]
        if hits:
            return min(hits, key=lambda d: (d.range, d.category, d.source_id))
    return None


def _goal_cells(point: WorldPoint, radius: float, passable: np.ndarray, res: float) -> list[tuple[int, int]]:
    h, w = passable.shape
    r0, c0 = int(math.floor(point.y / res)), int(math.floor(point.x / res))
    span = int(math.ceil(radius / res)) + 1
    rr = np.arange(max(0, r0 - span), min(h, r0 + span + 1))
    cc = np.arange(max(0, c0 - span), min(w, c0 + span + 1))
    R, C = np.meshgrid(rr, cc, indexing="ij")
    d2 = ((C + 0.5) * res - point.x) ** 2 + ((R + 0.5) * res - point.y) ** 2
    ok = (d2 <= radius * radius) & passable[R, C]
    return [(int(r), int(c)) for r, c in zip(R[ok], C[ok])]


def _entry_cell(field_m: np.ndarray, pose: Pose, res: float, search: float = 0.35) -> tuple[int, int] | None:
    """The agent's cell, or the cheapest nearby finite cell if the agent sits in inflation."""
    h, w = field_m.shape
    r0, c0 = int(math.floor(pose.y / res)), int(math.floor(pose.x / res))
    if 0 <= r0 < h and 0 <= c0 < w and math.isfinite(field_m[r0, c0]):
        return r0, c0
    span = int(math.ceil(search / res))
    best = None
    for r in range(max(0, r0 - span), min(h, r0 + span + 1)):
        for c in range(max(0, c0 - span), min(w, c0 + span + 1)):
            v = field_m[r, c]
            if not math.isfinite(v):
                continue
            d = math.hypot((c + 0.5) * res - pose.x, (r + 0.5) * res - pose.y)
            if d > search:
                continue
            key = (v + d, r, c)
            if best is None or key < best:
                best = key
    return None if best is None else (best[1], best[2])


def _segment_clear(pose: Pose, x: float, y: float, passable: np.ndarray, res: float) -> bool:
    length = math.hypot(x - pose.x, y - pose.y)
    n = max(2, int(math.ceil(length / (res / 2.0))))
    h, w = passable.shape
    # skip the first samples: the agent may start inside an inflated cell
    skip = res * 1.5
    for i in range(1, n + 1):
        t = i / n
        if t * length < skip:
            continue
        r = int(math.floor((pose.y + t * (y - pose.y)) / res))
        c = int(math.floor((pose.x + t * (x - pose.x)) / res))
        if not (0 <= r < h and 0 <= c < w) or not passable[r, c]:
            return False
    return True


def _lookahead_target(pose: Pose, cells: list[tuple[int, int]], passable: np.ndarray, res: float, reach: float) -> tuple[float, float]:
    centers = [((c + 0.5) * res, (r + 0.5) * res) for r, c in cells]
    target = centers[-1]
    chosen = None
    for x, y in centers:
        d = math.hypot(x - pose.x, y - pose.y)
        if d > reach:
            break
        if d > WAYPOINT_REACHED_M and _segment_clear(pose, x, y, passable, res):
            chosen = (x, y)
    if chosen is not None:
        return chosen
    for x, y in centers:
        if math.hypot(x - pose.x, y - pose.y) > WAYPOINT_REACHED_M:
            return x, y
    return target


def navigate(
    scene: SceneMap,
    pose: Pose,
    grid: OccupancyGrid,
    goal: WorldPoint,
    goal_radius: float,
    step_budget: int,
    sensor: Sensor,
    config: ActingConfig,
    regrounder: Callable[[dict, WorldPoint], WorldPoint | None] | None = None,
) -> ExecutionOutcome:
    """Drive toward ``goal`` until within ``goal_radius``, replanning on map changes."""
    res = grid.resolution
    out = ExecutionOutcome(reached=False, final_pose=pose, grounded=goal)
    field_m = None
    passable = None
    partial = False
    consecutive = 0
    since_perceive = 0
    goal_set: set[tuple[int, int]] = set()

    while True:
        if pose.distance_to(goal.x, goal.y) <= goal_radius or grid.cell_of(pose.x, pose.y) in goal_set:
            out.reached = True
            break
        if out.steps >= step_budget:
            out.failure = "step budget exhausted"
            break
        if field_m is None:
            passable = planning_passable(grid, config.inflation)
            goals = _goal_cells(goal, goal_radius, passable, res)
            if not goals:
                out.failure = "goal not reachable"
                break
            goal_set = set(goals)
            start = grid.cell_of(pose.x, pose.y)
            inside = 0 <= start[0] < grid.height and 0 <= start[1] < grid.width
            stop_at = start if inside and passable[start] else None
            field_m = fmm_arrival(passable, goals, stop_at) * res
            partial = stop_at is not None
        entry = _entry_cell(field_m, pose, res)
        if entry is None and partial:
            field_m = fmm_arrival(passable, sorted(goal_set)) * res
            partial = False
            entry = _entry_cell(field_m, pose, res)
        if entry is None:
            out.failure = "no path to goal"
            break
        reach_cells = int(config.lookahead / res) * 2 + 2
        cells = descend(field_m, entry, max_len=reach_cells)
        tx, ty = _lookahead_target(pose, cells, passable, res, config.lookahead)
        if math.hypot(tx - pose.x, ty - pose.y) <= WAYPOINT_REACHED_M:
            # standing on the last known cell of the path but outside the goal radius
            tx, ty = goal.x, goal.y
        action = next_low_level(pose, tx, ty)
        new_pose, collided = step(scene, pose, action)
        out.steps += 1
        out.low_level.append(action.short)
        if action is LowLevelAction.FORWARD and not collided:
            out.traveled += FORWARD_STEP_M
        pose = new_pose
        since_perceive += 1
        if collided:
            out.collisions += 1
            consecutive += 1
            if consecutive >= config.max_consecutive_collisions:
                out.failure = "blocked"
                break
        else:
            consecutive = 0
        if collided or since_perceive >= config.reperceive_every:
            since_perceive = 0
            views = sensor.render(pose)
            before = int(np.count_nonzero(grid.occupied))
            update_occupancy(grid, pose, views)
            changed = int(np.count_nonzero(grid.occupied)) != before
            if regrounder is not None:
                new_goal = regrounder(views, goal)
                if new_goal is not None and math.hypot(new_goal.x - goal.x, new_goal.y - goal.y) > res:
                    goal = new_goal
                    out.grounded = goal
                    changed = True
            if changed or collided:
                field_m = None
    out.final_pose = pose
    return out


def execute_global(
    action: GlobalAction,
    scene: SceneMap,
    pose: Pose,
    grid: OccupancyGrid,
    detections: Sequence[Detection],
    step_budget: int,
    sensor: Sensor,
    config: ActingConfig = ActingConfig(),
) -> tuple[ExecutionOutcome, OccupancyGrid, Pose]:
    """Run one non-stop global action to completion (or failure)."""
    if isinstance(action, Stop):
        raise ValueError("stop() is not executed by the local policy")

    if isinstance(action, MoveToDirection):
        theta = math.radians(pose.heading + DIRECTION_OFFSET_DEG[action.direction])
        goal = WorldPoint(
            pose.x + config.direction_distance * math.cos(theta),
            pose.y + config.direction_distance * math.sin(theta),
        )
        out = navigate(scene, pose, grid, goal, WAYPOINT_REACHED_M, step_budget, sensor, config)
        out.grounded = None
        out.requested_distance = config.direction_distance
        return out, grid, out.final_pose

    assert isinstance(action, (MoveToObject, MoveToRoom))
    name = action.name
    hit = ground_target(name, detections)
    if hit is None:
        out = ExecutionOutcome(reached=False, final_pose=pose, failure=f"target not detected: {name}")
        return out, grid, pose

    def reground(views, current: WorldPoint) -> WorldPoint | None:
        # stay on the same instance: only accept a re-detection near the current goal
        near = [
            d.estimated_position
            for d in sensor.detect(views, [name])
            if ground_target(name, [d]) is not None
        ]
        if not near:
            return None
        best = min(near, key=lambda p: math.hypot(p.x - current.x, p.y - current.y))
        return best if math.hypot(best.x - current.x, best.y - current.y) <= REGROUND_RADIUS_M else None

    out = navigate(
        scene, pose, grid, hit.estimated_position, config.goal_radius, step_budget, sensor, config, reground
    )
    return out, grid, out.final_pose
