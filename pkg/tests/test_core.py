import math

import numpy as np
import pytest

from intersched.core import (
    KinematicLimits,
    RoadGeometry,
    Trajectory,
    TrajectoryLog,
    VehicleState,
    constant_accel_trajectory,
    extreme_trajectory,
    first_crossing_time,
    stop_envelope,
)
from oracles import rollout

LIM = KinematicLimits(v_max=20.0, a_dec=4.0, a_acc=3.0, length=5.0)


def test_road_geometry_validation():
    RoadGeometry(3, (5.0, 5.0, 5.0))
    with pytest.raises(ValueError):
        RoadGeometry(1, (5.0,))
    with pytest.raises(ValueError):
        RoadGeometry(2, (5.0, -1.0))
    with pytest.raises(ValueError):
        RoadGeometry(2, (5.0,))


def test_constant_velocity_segment():
    traj = Trajectory(0.0, VehicleState(-100.0, 20.0), ((5.0, 0.0),), 20.0)
    s = traj.evaluate(5.0)
    assert s.position == pytest.approx(0.0, abs=1e-12)
    assert s.velocity == 20.0


def test_brake_to_stop_then_stay():
    # stopping distance v^2/(2 a_dec) = 400/8 = 50
    traj = extreme_trajectory(VehicleState(-100.0, 20.0), "min_accel", 0.0, LIM)
    s = traj.evaluate(10.0)
    assert s.position == pytest.approx(-50.0, abs=1e-12)
    assert s.velocity == 0.0
    s2 = traj.evaluate(100.0)
    assert s2.position == pytest.approx(-50.0, abs=1e-12)


def test_accelerate_to_vmax_then_clamp():
    traj = extreme_trajectory(VehicleState(0.0, 0.0), "max_accel", 0.0, LIM)
    t_sat = 20.0 / 3.0
    s = traj.evaluate(t_sat)
    assert s.position == pytest.approx(200.0 / 3.0, abs=1e-9)
    assert s.velocity == pytest.approx(20.0, abs=1e-12)
    s2 = traj.evaluate(t_sat + 2.0)
    assert s2.velocity == 20.0
    assert s2.position == pytest.approx(200.0 / 3.0 + 40.0, abs=1e-9)


def test_evaluate_before_origin_raises():
    traj = extreme_trajectory(VehicleState(0.0, 10.0), "max_accel", 5.0, LIM)
    with pytest.raises(ValueError):
        traj.evaluate(4.0)


def test_stop_envelope_values():
    assert stop_envelope(VehicleState(-50.0, 20.0), 4.0) == pytest.approx(0.0)
    assert stop_envelope(VehicleState(-10.0, 0.0), 4.0) == -10.0
    assert stop_envelope(VehicleState(-49.0, 20.0), 4.0) == pytest.approx(1.0)


def test_extreme_trajectory_saturated_start():
    traj = extreme_trajectory(VehicleState(-5.0, 20.0), "max_accel", 0.0, LIM)
    for t in (0.0, 1.0, 3.7):
        assert traj.evaluate(t).velocity == 20.0
    assert traj.evaluate(2.0).position == pytest.approx(35.0)


def test_min_accel_from_rest_is_stationary():
    traj = extreme_trajectory(VehicleState(-100.0, 0.0), "min_accel", 0.0, LIM)
    assert traj.evaluate(50.0).position == -100.0
    assert traj.evaluate(50.0).velocity == 0.0


def test_evaluate_matches_stepper_on_random_profiles():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n_seg = rng.integers(1, 6)
        segments = tuple(
            (float(rng.uniform(0.5, 30.0)), float(rng.uniform(-4.0, 3.0))) for _ in range(n_seg)
        )
        p0 = float(rng.uniform(-1500.0, 0.0))
        v0 = float(rng.uniform(0.0, 20.0))
        traj = Trajectory(0.0, VehicleState(p0, v0), segments, 20.0)
        ts, ps, vs = rollout(p0, v0, segments, 100.0, 20.0)
        idx = rng.choice(len(ts), size=200, replace=False)
        for i in idx:
            s = traj.evaluate(float(ts[i]))
            assert abs(s.position - ps[i]) < 1e-6
            assert abs(s.velocity - vs[i]) < 1e-6


def test_velocity_and_accel_bounds_on_random_profiles():
    rng = np.random.default_rng(11)
    for _ in range(10):
        segments = tuple(
            (float(rng.uniform(0.1, 10.0)), float(rng.uniform(-4.0, 3.0))) for _ in range(8)
        )
        traj = Trajectory(0.0, VehicleState(-500.0, float(rng.uniform(0, 20))), segments, 20.0)
        ts = np.linspace(0.0, 90.0, 4001)
        vs = np.array([traj.evaluate(float(t)).velocity for t in ts])
        assert vs.min() >= -1e-12
        assert vs.max() <= 20.0 + 1e-12
        dv = np.diff(vs) / np.diff(ts)
        assert dv.min() >= -4.0 - 1e-9
        assert dv.max() <= 3.0 + 1e-9


def test_braking_preserves_stopping_point():
    traj = extreme_trajectory(VehicleState(-120.0, 17.0), "min_accel", 0.0, LIM)
    env0 = stop_envelope(traj.evaluate(0.0), 4.0)
    for t in np.linspace(0.0, 17.0 / 4.0, 40):
        env = stop_envelope(traj.evaluate(float(t)), 4.0)
        assert env == pytest.approx(env0, abs=1e-9)


def test_first_crossing_time_exact():
    traj = Trajectory(0.0, VehicleState(-100.0, 20.0), ((math.inf, 0.0),), 20.0)
    assert first_crossing_time(traj, 0.0) == pytest.approx(5.0, abs=1e-12)
    # braking profile that never reaches the threshold
    stopper = extreme_trajectory(VehicleState(-100.0, 20.0), "min_accel", 0.0, LIM)
    assert first_crossing_time(stopper, 0.0) is None
    assert first_crossing_time(stopper, -60.0) is not None
    # accelerating from rest across a threshold beyond saturation
    acc = extreme_trajectory(VehicleState(-100.0, 0.0), "max_accel", 2.0, LIM)
    t_cross = first_crossing_time(acc, 0.0)
    assert acc.evaluate(t_cross).position == pytest.approx(0.0, abs=1e-9)


def test_first_crossing_time_respects_t_from():
    traj = Trajectory(0.0, VehicleState(0.0, 10.0), ((math.inf, 0.0),), 20.0)
    # already past the threshold: clamps to t_from
    assert first_crossing_time(traj, 5.0, t_from=3.0) == pytest.approx(3.0)


def test_trajectory_log_merge_and_lookup():
    log = TrajectoryLog()
    s0 = VehicleState(-100.0, 20.0)
    log.append(constant_accel_trajectory(s0, 0.0, 0.0, 0.1, LIM))
    s1 = log.entries[-1].evaluate(0.1)
    log.append(constant_accel_trajectory(s1, 0.0, 0.1, 0.1, LIM))
    assert len(log.entries) == 1  # contiguous same-accel commits merge
    s2 = log.entries[-1].evaluate(0.2)
    log.append(constant_accel_trajectory(s2, -4.0, 0.2, 0.1, LIM))
    assert len(log.entries) == 2
    st = log.state_at(0.15)
    assert st.position == pytest.approx(-97.0)
    assert st.velocity == 20.0
    st2 = log.state_at(0.25)
    assert st2.velocity == pytest.approx(20.0 - 4.0 * 0.05)


def test_trajectory_log_composite_phases_continuous():
    log = TrajectoryLog()
    s0 = VehicleState(-80.0, 20.0)
    log.append(constant_accel_trajectory(s0, -2.0, 0.0, 1.0, LIM))
    s1 = log.entries[-1].evaluate(1.0)
    log.append(extreme_trajectory(s1, "max_accel", 1.0, LIM))
    phases = log.composite_phases(10.0)
    t_cursor = 0.0
    for t0, p0, v0, a, dur in phases:
        assert t0 == pytest.approx(t_cursor, abs=1e-9)
        t_cursor = t0 + dur
    assert t_cursor >= 10.0 - 1e-9
    # positions continuous across phase boundaries
    for i in range(len(phases) - 1):
        t0, p0, v0, a, dur = phases[i]
        p_end = p0 + v0 * dur + 0.5 * a * dur * dur
        assert p_end == pytest.approx(phases[i + 1][1], abs=1e-9)
