"""Compiled inner loops: ray marching over the occupancy grid and the FMM sweep.

Ray sample positions use the same float64 expression everywhere
(``x + ((k + 1) * spacing) * cos(a)``, floored by the resolution), so the
renderer, the line-of-sight test and the map update agree on every cell.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)


@njit(cache=True)
def first_hits(occ, x, y, angles, spacing, n_samples, res):
    """Index of the first sample per ray that is occupied or off-grid; ``n_samples`` if none."""
    h, w = occ.shape
    out = np.empty(angles.shape[0], dtype=np.int64)
    for i in range(angles.shape[0]):
        c = math.cos(angles[i])
        s = math.sin(angles[i])
        out[i] = n_samples
        for k in range(n_samples):
            t = (k + 1) * spacing
            col = int(math.floor((x + t * c) / res))
            row = int(math.floor((y + t * s) / res))
            if row < 0 or row >= h or col < 0 or col >= w or occ[row, col]:
                out[i] = k
                break
    return out


@njit(cache=True)
def clear_until(occ, x, y, angles, spacing, n_samples, res, limits):
    """True per ray when no sample with ``t < limits[i]`` is occupied or off-grid."""
    h, w = occ.shape
    out = np.ones(angles.shape[0], dtype=np.bool_)
    for i in range(angles.shape[0]):
        c = math.cos(angles[i])
        s = math.sin(angles[i])
        for k in range(n_samples):
            t = (k + 1) * spacing
            if not t < limits[i]:
                break
            col = int(math.floor((x + t * c) / res))
            row = int(math.floor((y + t * s) / res))
            if row < 0 or row >= h or col < 0 or col >= w or occ[row, col]:
                out[i] = False
                break
    return out


@njit(cache=True)
def mark_rays(cells, x, y, angles, spacing, n_samples, res, hits, free_value, occupied_value):
    """Samples before ``hits[i]`` become free (never over occupied); the hit sample becomes occupied."""
    h, w = cells.shape
    for i in range(angles.shape[0]):
        c = math.cos(angles[i])
        s = math.sin(angles[i])
        last = min(hits[i], n_samples - 1)
        for k in range(last + 1):
            t = (k + 1) * spacing
            col = int(math.floor((x + t * c) / res))
            row = int(math.floor((y + t * s) / res))
            if row < 0 or row >= h or col < 0 or col >= w:
                continue
            if k < hits[i]:
                if cells[row, col] != occupied_value:
                    cells[row, col] = free_value
            elif hits[i] < n_samples:
                cells[row, col] = occupied_value


@njit(cache=True)
def _solve(a, b, h):
    if a > b:
        a, b = b, a
    if b == np.inf or b - a >= h:
        return a + h
    d = b - a
    return 0.5 * (a + b + math.sqrt(2.0 * h * h - d * d))


@njit(cache=True)
def fmm_sweep(passable, goal_rows, goal_cols, stop_r, stop_c):
    """Eikonal arrival times in cell units on an 8-neighbour stencil.

    Axis neighbours give the usual quadratic with spacing 1; the diagonal pair
    gives the same quadratic rotated by 45 degrees with spacing sqrt(2). A
    diagonal is only used when both cells it cuts past are passable.
    """
    h, w = passable.shape
    W = w + 2
    n = (h + 2) * W
    pas = np.zeros(n, dtype=np.bool_)
    for r in range(h):
        for c in range(w):
            pas[(r + 1) * W + c + 1] = passable[r, c]
    T = np.full(n, np.inf)
    known = np.zeros(n, dtype=np.bool_)
    heap = [(0.0, 0)]
    heap.pop()
    for g in range(goal_rows.shape[0]):
        i = (goal_rows[g] + 1) * W + goal_cols[g] + 1
        T[i] = 0.0
        pas[i] = True
        heap.append((0.0, i))
    heapq.heapify(heap)
    stop_idx = -1 if stop_r < 0 else (stop_r + 1) * W + stop_c + 1
    E = 1
    N = W
    neigh = np.array([1, -1, W, -W, W + 1, W - 1, -W + 1, -W - 1])
    while len(heap) > 0:
        t, i = heapq.heappop(heap)
        if known[i] or t > T[i]:
            continue
        known[i] = True
        if i == stop_idx:
            break
        for off in neigh:
            j = i + off
            if known[j] or not pas[j]:
                continue
            a = min(T[j + E] if known[j + E] else np.inf, T[j - E] if known[j - E] else np.inf)
            b = min(T[j + N] if known[j + N] else np.inf, T[j - N] if known[j - N] else np.inf)
            best = _solve(a, b, 1.0)
            pe = pas[j + E]
            pw = pas[j - E]
            pn = pas[j + N]
            ps = pas[j - N]
            cc = np.inf
            k = j + N + E
            if known[k] and pn and pe:
                cc = min(cc, T[k])
            k = j - N - E
            if known[k] and ps and pw:
                cc = min(cc, T[k])
            dd = np.inf
            k = j + N - E
            if known[k] and pn and pw:
                dd = min(dd, T[k])
            k = j - N + E
            if known[k] and ps and pe:
                dd = min(dd, T[k])
            if cc < np.inf or dd < np.inf:
                t2 = _solve(cc, dd, SQRT2)
                if t2 < best:
                    best = t2
            if best < T[j]:
                T[j] = best
                heapq.heappush(heap, (best, j))
    out = np.empty((h, w))
    for r in range(h):
        for c in range(w):
            i = (r + 1) * W + c + 1
            out[r, c] = T[i] if known[i] else np.inf
    return out
