import math
import random

import numpy as np
import pytest

from cornav.actions import MoveToDirection, MoveToObject, Stop
from cornav.geometry import LowLevelAction, Pose
from cornav.local_policy.acting import ActingConfig, execute_global, ground_target
from cornav.local_policy.control import path_to_actions
from cornav.local_policy.frontier import frontier_cells, nearest_frontier
from cornav.local_policy.mapping import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, update_occupancy
from cornav.perception import NoiseConfig, Sensor
from cornav.world import AGENT_RADIUS_M, load_scene, render_views

from conftest import dijkstra8, room_document, wall_cells

F, L, R = LowLevelAction.FORWARD, LowLevelAction.TURN_LEFT, LowLevelAction.TURN_RIGHT


# control

def test_waypoint_straight_ahead():
    assert path_to_actions(Pose(1, 1, 0), [(1.6, 1.0)]) == [F, F, F]


def test_waypoint_ninety_left():
    acts = path_to_actions(Pose(1, 1, 0), [(1.0, 2.0)])
    assert acts[:6] == [L] * 6 and set(acts[6:]) == {F}


def test_deadband_single_turn():
    th = math.radians(10)
    acts = path_to_actions(Pose(0, 0, 0), [(math.cos(th), math.sin(th))])
    assert acts[0] == L and acts[1] == F


def test_action_cap():
    assert len(path_to_actions(Pose(0, 0, 0), [(100.0, 0.0)], max_actions=7)) == 7
    with pytest.raises(ValueError):
        path_to_actions(Pose(0, 0, 0), [])


# mapping

def _wall_scene():
    return load_scene(room_document(occupied=wall_cells(1, 99, 30, 32)))


def test_wall_ahead_marks_free_then_occupied():
    scene = _wall_scene()
    pose = Pose(1.05, 5.05, 0.0)
    grid = OccupancyGrid.unknown_like(scene)
    update_occupancy(grid, pose, render_views(scene, pose))
    row = grid.cells[50]
    assert np.all(row[11:30] == FREE)
    assert row[30] == OCCUPIED
    assert np.all(row[32:] == UNKNOWN)


def test_occupied_never_downgraded():
    scene = load_scene(room_document())
    pose = Pose(5, 5, 0)
    grid = OccupancyGrid.unknown_like(scene)
    grid.cells[50, 60] = OCCUPIED
    update_occupancy(grid, pose, render_views(scene, pose))
    assert grid.cells[50, 60] == OCCUPIED


def test_convex_room_full_scan_matches_ground_truth():
    scene = load_scene(room_document(width=40, height=40))
    pose = Pose(2.0, 2.0, 0.0)
    grid = OccupancyGrid.unknown_like(scene)
    update_occupancy(grid, pose, render_views(scene, pose))
    inner = np.zeros_like(scene.occupied)
    inner[0, 1:-1] = inner[-1, 1:-1] = inner[1:-1, 0] = inner[1:-1, -1] = True
    assert np.all(grid.cells[inner] == OCCUPIED)
    assert not np.any((grid.cells == OCCUPIED) & ~scene.occupied)


# frontier

def _band_grid():
    cells = np.full((30, 100), OCCUPIED, dtype=np.int8)
    cells[10:20, :] = FREE
    cells[10:20, :6] = UNKNOWN
    cells[10:20, 75:] = UNKNOWN
    return OccupancyGrid(0.1, 100, 30, cells)


def test_no_frontier_when_fully_known():
    grid = _band_grid()
    grid.cells[grid.cells == UNKNOWN] = FREE
    assert nearest_frontier(grid, Pose(5.55, 1.55, 0)) is None


def test_frontier_cells_definition():
    grid = _band_grid()
    mask = frontier_cells(grid)
    assert mask.any()
    unk = grid.unknown
    for r, c in zip(*np.nonzero(mask)):
        assert grid.cells[r, c] == FREE
        assert any(unk[r + dr, c + dc] for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)))


def test_nearest_cluster_by_geodesic():
    grid = _band_grid()
    pose = Pose(5.55, 1.55, 0.0)
    cells = nearest_frontier(grid, pose, inflation=0.0)
    # oracle: Dijkstra from the agent over the known-passable band
    d = dijkstra8(grid.cells != OCCUPIED, [grid.cell_of(pose.x, pose.y)], 0.1)
    labels = {c for _, c in cells}
    assert labels == {74}
    assert d[15, 74] == pytest.approx(1.9) and d[15, 6] == pytest.approx(4.9)


# acting

def _obj(i, cat, x, y, r=0.2):
    return {"id": i, "category": cat, "x": x, "y": y, "radius": r}


def _sensor(scene):
    return Sensor(scene, {}, NoiseConfig(), random.Random(0))


def test_reach_visible_mug():
    scene = load_scene(room_document(objects=[_obj("m", "mug", 5.0, 2.0)]))
    pose = Pose(2.0, 2.0, 0.0)
    sensor = _sensor(scene)
    views = sensor.render(pose)
    dets = sensor.detect(views, ["mug"])
    grid = OccupancyGrid.unknown_like(scene)
    update_occupancy(grid, pose, views)
    out, grid, final = execute_global(MoveToObject("mug"), scene, pose, grid, dets, 200, sensor)
    assert out.reached and final.distance_to(5.0, 2.0) <= 1.5
    assert out.traveled > 0 and out.steps <= 200


def test_direction_blocked_by_wall():
    scene = _wall_scene()
    pose = Pose(2.45, 5.05, 0.0)
    sensor = _sensor(scene)
    grid = OccupancyGrid.unknown_like(scene)
    update_occupancy(grid, pose, sensor.render(pose))
    out, _, _ = execute_global(MoveToDirection("front"), scene, pose, grid, [], 300, sensor)
    assert not out.reached and out.traveled < 1.3
    assert out.requested_distance == 1.5


def test_direction_in_open_space():
    scene = load_scene(room_document())
    pose = Pose(5.0, 5.0, 0.0)
    sensor = _sensor(scene)
    grid = OccupancyGrid.unknown_like(scene)
    out, _, final = execute_global(MoveToDirection("left"), scene, pose, grid, [], 300, sensor)
    assert out.reached and out.traveled >= 1.3
    assert final.y > 6.2


def test_unknown_target_fails_immediately():
    scene = load_scene(room_document())
    pose = Pose(5, 5, 0)
    out, _, final = execute_global(MoveToObject("unicorn"), scene, pose, OccupancyGrid.unknown_like(scene), [], 300, _sensor(scene))
    assert not out.reached and out.traveled == 0 and out.steps == 0 and final == pose


def test_stop_not_executable():
    scene = load_scene(room_document())
    with pytest.raises(ValueError):
        execute_global(Stop(), scene, Pose(5, 5, 0), OccupancyGrid.unknown_like(scene), [], 10, _sensor(scene))


def test_trajectory_collision_consistent(scenes):
    scene = scenes["home"]
    sensor = _sensor(scene)
    pose = Pose(2.5, 2.5, 0.0)
    grid = OccupancyGrid.unknown_like(scene)
    for d in ("front", "left", "rear", "right", "front"):
        out, grid, new = execute_global(MoveToDirection(d), scene, pose, grid, [], 60, sensor)
        p = pose
        from cornav.world import step

        for code in out.low_level:
            p, _ = step(scene, p, LowLevelAction.from_short(code))
            assert scene.disc_clear(p.x, p.y, AGENT_RADIUS_M)
        assert p == new
        pose = new


def test_ground_target_prefers_objects_then_range(scenes):
    from cornav.perception import Detection
    from cornav.geometry import WorldPoint

    def det(cat, rng, kind="object"):
        return Detection(cat, cat, "front", 0, 0, rng, WorldPoint(0, 0), 1.0, kind, f"{kind}:{cat}:{rng}")

    dets = [det("kitchen", 1.0, "room"), det("kitchen", 3.0), det("kitchen", 2.0)]
    assert ground_target("kitchen", dets).range == 2.0
    assert ground_target("sofa", dets) is None


def test_acting_config_goal_radius():
    assert ActingConfig().goal_radius == pytest.approx(1.0)
