"""Agent-side occupancy grid built from rendered depth scans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DIRECTIONS, Pose
from .._kernels import mark_rays
from ..world import (
    AGENT_RADIUS_M,
    RAY_STEP_FRACTION,
    DirectionalView,
    SceneMap,
    ray_sample_distances,
    view_column_angles,
)

UNKNOWN = -1
FREE = 0
OCCUPIED = 1


@dataclass
class OccupancyGrid:
    resolution: float
    width: int
    height: int
    cells: np.ndarray  # int8, shape (height, width)

    @classmethod
    def unknown_like(cls, scene: SceneMap) -> "OccupancyGrid":
        cells = np.full((scene.height, scene.width), UNKNOWN, dtype=np.int8)
        return cls(scene.resolution, scene.width, scene.height, cells)

    @property
    def occupied(self) -> np.ndarray:
        return self.cells == OCCUPIED

    @property
    def free(self) -> np.ndarray:
        return self.cells == FREE

    @property
    def unknown(self) -> np.ndarray:
        return self.cells == UNKNOWN

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.width, self.height, self.cells.copy())

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(np.floor(y / self.resolution)), int(np.floor(x / self.resolution))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (col + 0.5) * self.resolution, (row + 0.5) * self.resolution


def update_occupancy(
    grid: OccupancyGrid,
    pose: Pose,
    views: dict[str, DirectionalView],
    agent_radius: float = AGENT_RADIUS_M,
) -> OccupancyGrid:
    """Mark ray cells before each depth hit Free and the hit cell Occupied (in place).

    Occupied is never downgraded. The agent's own footprint is marked Free.
    """
    res = grid.resolution
    cells = grid.cells
    for d in DIRECTIONS:
        view = views[d]
        intr = view.intrinsics
        ts = ray_sample_distances(intr.max_range, res)
        angles = view_column_angles(view.pose, d, intr)
        depth = np.asarray(view.depth)
        # recover the renderer's sample index from its depth value
        hits = np.where(depth < intr.max_range, np.searchsorted(ts, depth), len(ts)).astype(np.int64)
        mark_rays(cells, view.pose.x, view.pose.y, angles, res * RAY_STEP_FRACTION, len(ts), res, hits, FREE, OCCUPIED)

    # footprint
    r0, c0 = grid.cell_of(pose.x, pose.y)
    span = int(np.ceil(agent_radius / res))
    for r in range(r0 - span, r0 + span + 1):
        for c in range(c0 - span, c0 + span + 1):
            if 0 <= r < grid.height and 0 <= c < grid.width:
                cx, cy = grid.cell_center(r, c)
                if (cx - pose.x) ** 2 + (cy - pose.y) ** 2 <= agent_radius ** 2 and cells[r, c] != OCCUPIED:
                    cells[r, c] = FREE
    return grid
