from __future__ import annotations

import random
from importlib import resources

import numpy as np
import pytest

from cornav.perception import NoiseConfig, Sensor, load_lexicon
from cornav.world import load_episodes, load_scene


def room_document(width=100, height=100, resolution=0.1, occupied=(), objects=(), rooms=(), name="room"):
    return {
        "name": name,
        "resolution": resolution,
        "width": width,
        "height": height,
        "occupied": [list(rc) for rc in occupied],
        "objects": list(objects),
        "rooms": list(rooms),
    }


def wall_cells(r0, r1, c0, c1):
    return [(r, c) for r in range(r0, r1) for c in range(c0, c1)]


def bundled_scene(name):
    return load_scene(resources.files("cornav.data").joinpath("scenes", f"{name}.json").read_bytes())


def bundled_episodes(name):
    return load_episodes(resources.files("cornav.data").joinpath("episodes", f"{name}.json").read_bytes())


@pytest.fixture(scope="session")
def scenes():
    return {n: bundled_scene(n) for n in ("home", "cafe")}


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture
def empty_room():
    return load_scene(room_document())


def make_sensor(scene, lexicon, noise=NoiseConfig(), seed=0):
    return Sensor(scene, lexicon, noise, random.Random(seed))


def random_free_grid(rng: np.random.Generator, shape=(100, 100), density=0.3):
    return rng.random(shape) >= density


def dijkstra8(passable: np.ndarray, goals, resolution: float = 1.0) -> np.ndarray:
    """8-connected graph distance with corner-legal diagonals (scipy csgraph)."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra

    h, w = passable.shape
    idx = np.arange(h * w).reshape(h, w)
    src, dst, wts = [], [], []
    for dr, dc, cost in ((0, 1, 1.0), (1, 0, 1.0), (1, 1, np.sqrt(2)), (1, -1, np.sqrt(2))):
        r0, r1 = 0, h - dr
        c0, c1 = max(0, -dc), w - max(0, dc)
        a = passable[r0:r1, c0:c1]
        b = passable[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
        ok = a & b
        if dr and dc:
            ok &= passable[r0 + dr : r1 + dr, c0:c1] & passable[r0:r1, c0 + dc : c1 + dc]
        ia = idx[r0:r1, c0:c1][ok]
        ib = idx[r0 + dr : r1 + dr, c0 + dc : c1 + dc][ok]
        src += [ia, ib]
        dst += [ib, ia]
        wts += [np.full(ia.size, cost)] * 2
    graph = coo_matrix((np.concatenate(wts), (np.concatenate(src), np.concatenate(dst))), shape=(h * w, h * w)).tocsr()
    starts = [int(idx[r, c]) for r, c in goals]
    dist = dijkstra(graph, indices=starts, min_only=True)
    return dist.reshape(h, w) * resolution


def u_obstacle(shape=(100, 100)):
    """Free grid with a U opening away from the goal at (50, 80); start at (50, 20)."""
    free = np.ones(shape, dtype=bool)
    free[30:71, 60:63] = False  # bottom of the U faces the start side
    free[30:33, 40:63] = False
    free[68:71, 40:63] = False
    return free
