import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from silent_tracker.channel import Pose, angular_offset
from silent_tracker.mobility import MobilityError, MobilityModel, Scenario, pose_at

times = st.floats(0.0, 100.0)
starts = st.builds(Pose, st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 360, exclude_max=True))


def test_walk_default_speed_and_displacement():
    m = MobilityModel(Scenario.WALK, Pose(0, 0))
    assert m.speed == 1.4
    p = pose_at(m, 10.0)
    assert (p.x, p.y) == pytest.approx((14.0, 0.0))


def test_vehicular_twenty_mph():
    m = MobilityModel("vehicular", Pose(0, 0))
    # 20 mi/h * 1609.344 m/mi / 3600 s/h
    assert m.speed == pytest.approx(20 * 1609.344 / 3600, abs=1e-12)
    assert pose_at(m, 1.0).x == pytest.approx(8.9408, abs=1e-9)


def test_rotation_full_turn_in_three_seconds():
    m = MobilityModel(Scenario.ROTATION, Pose(3, 4, 30.0))
    assert m.omega == 120.0
    p = pose_at(m, 3.0)
    assert (p.x, p.y) == (3, 4)
    assert angular_offset(p.heading, 30.0) == pytest.approx(0.0, abs=1e-9)
    assert pose_at(m, 0.75).heading == pytest.approx(120.0)


def test_static_ignores_speed():
    m = MobilityModel(Scenario.STATIC, Pose(1, 2, 3), speed=5.0, omega=99.0)
    assert pose_at(m, 42.0) == Pose(1, 2, 3)


def test_direction_of_motion():
    m = MobilityModel(Scenario.WALK, Pose(0, 0, 10.0), direction=90.0)
    p = pose_at(m, 2.0)
    assert (p.x, p.y, p.heading) == pytest.approx((0.0, 2.8, 10.0), abs=1e-12)


@pytest.mark.parametrize("kw", [{"speed": -1.0}, {"speed": math.inf}, {"omega": math.nan}])
def test_invalid_parameters(kw):
    with pytest.raises(MobilityError):
        MobilityModel(Scenario.WALK, **kw)


def test_negative_time():
    with pytest.raises(MobilityError):
        pose_at(MobilityModel(Scenario.WALK), -0.001)


def test_unknown_variant():
    with pytest.raises(ValueError):
        MobilityModel("teleport")


@given(st.sampled_from(list(Scenario)), starts)
def test_starts_at_start(variant, start):
    assert pose_at(MobilityModel(variant, start), 0.0) == start


@given(st.sampled_from([Scenario.WALK, Scenario.VEHICULAR]), starts, times, st.floats(0, 360))
def test_linear_keeps_heading_and_speed(variant, start, t, direction):
    m = MobilityModel(variant, start, direction=direction)
    p = pose_at(m, t)
    assert p.heading == start.heading
    assert math.hypot(p.x - start.x, p.y - start.y) == pytest.approx(m.speed * t, abs=1e-9)


@given(starts, times, st.floats(-720, 720))
def test_rotation_keeps_position(start, t, omega):
    p = pose_at(MobilityModel(Scenario.ROTATION, start, omega=omega), t)
    assert (p.x, p.y) == (start.x, start.y)
    assert angular_offset(p.heading, start.heading + omega * t) == pytest.approx(0.0, abs=1e-6)


@given(st.sampled_from(list(Scenario)), starts, times)
def test_continuous(variant, start, t):
    m = MobilityModel(variant, start)
    a, b = pose_at(m, t), pose_at(m, t + 1e-6)
    assert math.hypot(b.x - a.x, b.y - a.y) <= 1e-5
    assert angular_offset(a.heading, b.heading) <= 1e-3
