"""Frontier detection and selection for frontier-based exploration."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..geometry import Pose
from .fmm import fmm_arrival, planning_passable
from .mapping import OccupancyGrid

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def frontier_cells(grid: OccupancyGrid, min_unknown_region: int = 4) -> np.ndarray:
    """Free cells 4-adjacent to Unknown.

    Unknown pockets smaller than ``min_unknown_region`` cells (gaps between
    diverging depth rays) are ignored.
    """
    unknown = grid.unknown
    if min_unknown_region > 1 and unknown.any():
        labels, n = ndimage.label(unknown, structure=_FOUR)
        sizes = np.bincount(labels.ravel())
        big = sizes >= min_unknown_region
        big[0] = False
        unknown = big[labels]
    near_unknown = ndimage.binary_dilation(unknown, structure=_FOUR) & ~unknown
    return grid.free & near_unknown


def nearest_frontier(
    grid: OccupancyGrid,
    pose: Pose,
    inflation: float = 0.2,
    min_cluster_size: int = 3,
    exclude: np.ndarray | None = None,
) -> list[tuple[int, int]] | None:
    """Cells of the frontier cluster whose centroid is soonest reached from the agent."""
    mask = frontier_cells(grid)
    if exclude is not None:
        mask &= ~exclude
    if not mask.any():
        return None
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    passable = planning_passable(grid, inflation)
    start = grid.cell_of(pose.x, pose.y)
    field = fmm_arrival(passable, [start]) * grid.resolution
    best = None
    for k in range(1, n + 1):
        rows, cols = np.nonzero(labels == k)
        if rows.size < min_cluster_size:
            continue
        cr, cc = rows.mean(), cols.mean()
        rep = int(np.argmin((rows - cr) ** 2 + (cols - cc) ** 2))
        cost = field[rows[rep], cols[rep]]
        if not math.isfinite(cost):
            cost = float(field[rows, cols].min())
        if not math.isfinite(cost):
            continue
        key = (cost, int(rows[rep]), int(cols[rep]))
        if best is None or key < best[0]:
            best = (key, [(int(r), int(c)) for r, c in zip(rows, cols)], (int(rows[rep]), int(cols[rep])))
    if best is None:
        return None
    # representative (centroid-nearest) cell first
    cells = best[1]
    cells.remove(best[2])
    return [best[2]] + cells
