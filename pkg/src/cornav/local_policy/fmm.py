"""Fast Marching arrival fields on occupancy grids and greedy path readout.

The solver is first-order upwind with an 8-neighbour stencil: every cell takes
the smaller of the axis-aligned quadratic update and the same update on the
45-degree rotated stencil (spacing sqrt(2)). Single-neighbour updates fall out
of the quadratic when the two upwind values differ by more than the spacing,
so the result never exceeds the 8-connected graph distance, and for a single
source it never undercuts the straight-line distance.

Diagonal moves are only allowed when both cells sharing the corner are
passable (no corner cutting); ``dijkstra8`` in the tests uses the same rule.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .._kernels import fmm_sweep

INF = math.inf


def inflate(blocked: np.ndarray, inflation_m: float, resolution: float) -> np.ndarray:
    """Cells whose centre lies closer than ``inflation_m`` to a blocked cell's square.

    Blocked cells themselves are included.
    """
    if not blocked.any():
        return np.zeros_like(blocked, dtype=bool)
    if inflation_m <= 0:
        return blocked.copy()
    # centre-to-centre distance (cells) to nearest blocked cell; the square's
    # edge is half a cell nearer along an axis
    dist = ndimage.distance_transform_edt(~blocked)
    return dist * resolution < inflation_m + resolution / 2.0


def fmm_arrival(
    passable: np.ndarray,
    goals: Iterable[tuple[int, int]],
    stop_at: tuple[int, int] | None = None,
) -> np.ndarray:
    """Arrival times in cell units (multiply by resolution for metres).

    ``goals`` are seeded at zero even if impassable. With ``stop_at`` the march
    ends once that cell is frozen; cells not yet frozen are reported as inf.
    """
    h, w = passable.shape
    cells = np.asarray(list(goals), dtype=np.int64).reshape(-1, 2)
    if len(cells) == 0:
        raise ValueError("fmm_arrival needs at least one goal cell")
    bad = (cells[:, 0] < 0) | (cells[:, 0] >= h) | (cells[:, 1] < 0) | (cells[:, 1] >= w)
    if bad.any():
        raise ValueError(f"goal cell {tuple(cells[bad][0])} outside grid")
    sr, sc = (-1, -1) if stop_at is None else stop_at
    return fmm_sweep(np.ascontiguousarray(passable, dtype=bool), cells[:, 0].copy(), cells[:, 1].copy(), int(sr), int(sc))


def fmm_field(
    grid,
    goal_cells: Sequence[tuple[int, int]],
    inflation: float,
    stop_at: tuple[int, int] | None = None,
) -> np.ndarray:
    """Arrival field in metres over an occupancy grid or scene.

    Occupied cells block; unknown cells are traversable. Cells within
    ``inflation`` of an occupied cell are excluded.
    """
    passable = planning_passable(grid, inflation)
    return fmm_arrival(passable, goal_cells, stop_at) * grid.resolution


def planning_passable(grid, inflation: float) -> np.ndarray:
    blocked = np.asarray(grid.occupied, dtype=bool)
    return ~inflate(blocked, inflation, grid.resolution)


_NEIGH8 = ((0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1))


class UnreachableStart(ValueError):
    pass


def descend(field: np.ndarray, start: tuple[int, int], max_len: int | None = None) -> list[tuple[int, int]]:
    """Greedy descent over corner-legal 8-neighbours until a zero-arrival cell."""
    h, w = field.shape
    r, c = start
    if not math.isfinite(field[r, c]):
        raise UnreachableStart(f"start cell {start} is unreachable")
    finite = np.isfinite(field)
    path = [(r, c)]
    limit = max_len if max_len is not None else h * w
    while field[r, c] > 0.0 and len(path) < limit:
        best = field[r, c]
        nxt = None
        for dr, dc in _NEIGH8:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < h and 0 <= cc < w):
                continue
            if dr and dc and not (finite[r + dr, c] and finite[r, c + dc]):
                continue
            v = field[rr, cc]
            if v < best:
                best, nxt = v, (rr, cc)
        if nxt is None:
            break
        r, c = nxt
        path.append(nxt)
    return path


def extract_path(field: np.ndarray, start_cell: tuple[int, int], resolution: float) -> list[tuple[float, float]]:
    """Waypoints (cell centres, world metres) from ``start_cell`` down to the goal."""
    return [((c + 0.5) * resolution, (r + 0.5) * resolution) for r, c in descend(field, start_cell)]
