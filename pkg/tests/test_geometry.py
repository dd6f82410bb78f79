import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cornav.geometry import (
    CameraIntrinsics,
    LowLevelAction,
    Pose,
    WorldPoint,
    apply_low_level,
    pixel_to_world,
    sector_of,
    world_to_pixel,
)

INTR = CameraIntrinsics()
coords = st.floats(-50, 50, allow_nan=False)
headings = st.floats(-720, 720, allow_nan=False)


def test_center_pixel_on_axis():
    p = pixel_to_world(64, 2.0, Pose(0, 0, 0), "front", INTR)
    assert p.x == pytest.approx(2.0) and p.y == pytest.approx(0.0, abs=1e-12)


def test_center_pixel_rotated_pose():
    p = pixel_to_world(64, 2.0, Pose(0, 0, 90), "front", INTR)
    assert p.x == pytest.approx(0.0, abs=1e-12) and p.y == pytest.approx(2.0)


def test_left_edge_pixel_matches_hand_backprojection():
    # f = 64 / tan(45 deg) = 64 px; column 0 is 64 px left of the axis -> atan(64/64) = 45 deg
    f = 64 / math.tan(math.radians(45))
    bearing = math.atan2(64 - 0, f)
    expected = (2.0 * math.cos(bearing), 2.0 * math.sin(bearing))
    p = pixel_to_world(0, 2.0, Pose(0, 0, 0), "front", INTR)
    assert (p.x, p.y) == pytest.approx(expected, abs=1e-12)
    assert math.degrees(math.atan2(p.y, p.x)) == pytest.approx(45.0)


@pytest.mark.parametrize("view,angle", [("front", 0), ("left", 90), ("right", 270), ("rear", 180)])
def test_view_headings(view, angle):
    p = pixel_to_world(64, 1.0, Pose(0, 0, 30), view, INTR)
    assert math.degrees(math.atan2(p.y, p.x)) % 360 == pytest.approx((30 + angle) % 360)


@pytest.mark.parametrize("u,rng", [(-1, 1.0), (128, 1.0), (10, 0.0), (10, -2.0)])
def test_pixel_to_world_rejects_bad_input(u, rng):
    with pytest.raises(ValueError):
        pixel_to_world(u, rng, Pose(0, 0, 0), "front", INTR)


def test_unknown_view_direction():
    with pytest.raises(ValueError):
        pixel_to_world(3, 1.0, Pose(0, 0, 0), "up", INTR)


@pytest.mark.parametrize("kw", [{"horizontal_fov": 0}, {"horizontal_fov": 180}, {"image_width": 0}, {"max_range": 0}])
def test_intrinsics_validation(kw):
    with pytest.raises(ValueError):
        CameraIntrinsics(**kw)


def test_forward_and_turns():
    assert apply_low_level(Pose(0, 0, 0), LowLevelAction.FORWARD) == Pose(0.2, 0.0, 0.0)
    assert apply_low_level(Pose(0, 0, 0), LowLevelAction.TURN_LEFT) == Pose(0, 0, 15)
    assert apply_low_level(Pose(0, 0, 0), LowLevelAction.TURN_RIGHT).heading == 345


def test_full_rotation():
    p = Pose(1, 2, 30)
    for _ in range(24):
        p = apply_low_level(p, LowLevelAction.TURN_LEFT)
    assert p == Pose(1, 2, 30)


def test_pose_normalizes_heading():
    assert Pose(0, 0, -15).heading == 345
    assert Pose(0, 0, 720).heading == 0
    assert Pose(0, 0, -1e-18).heading == 0
    with pytest.raises(ValueError):
        Pose(math.nan, 0, 0)
    with pytest.raises(ValueError):
        WorldPoint(math.inf, 0)


@given(coords, coords, headings, st.floats(0, 127.999), st.floats(0.01, 10), st.sampled_from(["front", "left", "right", "rear"]))
def test_pixel_to_world_preserves_length(x, y, h, u, r, view):
    pose = Pose(x, y, h)
    p = pixel_to_world(u, r, pose, view, INTR)
    assert math.hypot(p.x - x, p.y - y) == pytest.approx(r, rel=1e-9)


@given(coords, coords, headings)
def test_turn_left_then_right_is_identity(x, y, h):
    p = Pose(x, y, h)
    back = apply_low_level(apply_low_level(p, LowLevelAction.TURN_LEFT), LowLevelAction.TURN_RIGHT)
    assert back.x == p.x and back.y == p.y
    assert min(abs(back.heading - p.heading), 360 - abs(back.heading - p.heading)) < 1e-9


@given(coords, coords, headings, st.floats(0.05, 9.9), st.floats(-180, 180))
def test_projection_round_trip(x, y, h, r, bearing):
    pose = Pose(x, y, h)
    t = math.radians(h + bearing)
    pt = WorldPoint(x + r * math.cos(t), y + r * math.sin(t))
    proj = world_to_pixel(pt, pose, INTR)
    assert proj is not None
    view, u, rng = proj
    back = pixel_to_world(u, rng, pose, view, INTR)
    assert math.hypot(back.x - pt.x, back.y - pt.y) <= 0.05


@given(st.floats(-1000, 1000))
def test_sectors_partition_circle(b):
    assert sector_of(b) in ("front", "left", "right", "rear")
    assert sector_of(b) == sector_of(b + 360)


def test_projection_at_sector_seam():
    # bearing 135 deg lands on the left/rear seam; rounding must not push it off-image
    proj = world_to_pixel(WorldPoint(-1 / math.sqrt(2), 1 / math.sqrt(2)), Pose(0, 0, 540), INTR)
    assert proj is not None and 0 <= proj[1] < 128


def test_sector_boundaries():
    assert sector_of(45) == "front"
    assert sector_of(45.0001) == "left"
    assert sector_of(-45) == "right"
    assert sector_of(180) == "rear"
    assert sector_of(-135) == "rear"
