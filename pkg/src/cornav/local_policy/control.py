"""Waypoints to the 15-degree / 20 cm embodiment."""

from __future__ import annotations

import math
from typing import Sequence

from ..geometry import LowLevelAction, Pose, apply_low_level, wrap_deg

BEARING_DEADBAND_DEG = 7.5
WAYPOINT_REACHED_M = 0.15


def bearing_error(pose: Pose, x: float, y: float) -> float:
    return wrap_deg(math.degrees(math.atan2(y - pose.y, x - pose.x)) - pose.heading)


def next_low_level(pose: Pose, x: float, y: float) -> LowLevelAction:
    err = bearing_error(pose, x, y)
    if abs(err) <= BEARING_DEADBAND_DEG:
        return LowLevelAction.FORWARD
    return LowLevelAction.TURN_LEFT if err > 0 else LowLevelAction.TURN_RIGHT


def path_to_actions(
    pose: Pose,
    waypoints: Sequence[tuple[float, float]],
    max_actions: int = 300,
) -> list[LowLevelAction]:
    """Turn in place until within the deadband of the next waypoint, then step forward.

    Collisions are not simulated here; the caller steps the world.
    """
    if not waypoints:
        raise ValueError("path_to_actions needs at least one waypoint")
    pending = list(waypoints)
    out: list[LowLevelAction] = []
    p = pose
    while pending and len(out) < max_actions:
        wx, wy = pending[0]
        if math.hypot(wx - p.x, wy - p.y) <= WAYPOINT_REACHED_M:
            pending.pop(0)
            continue
        a = next_low_level(p, wx, wy)
        out.append(a)
        p = apply_low_level(p, a)
    return out
