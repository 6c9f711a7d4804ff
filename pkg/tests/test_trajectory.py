import json

import numpy as np
import pytest

from cdpr.trajectory import (TrajectoryPlan, load_plan, plan_line, plan_square, sample,
                             sample_array, sample_count, save_plan)


def test_trapezoid_arithmetic():
    plan = plan_square((750, 850), 200, 100, accel=1000)
    assert len(plan.segments) == 4
    for seg in plan.segments:
        assert seg.ramp_time == pytest.approx(0.1)
        assert seg.cruise_time == pytest.approx(1.9)
        assert seg.duration == pytest.approx(2.1)


def test_triangular_at_high_speed():
    plan = plan_square((750, 850), 200, 1000, accel=1000)
    assert all(seg.is_triangular for seg in plan.segments)
    seg = plan.segments[0]
    assert seg.peak_speed == pytest.approx(np.sqrt(1000 * 200))
    assert seg.distance(seg.duration) == pytest.approx(200)


def test_zero_side_rejected():
    with pytest.raises(ValueError):
        plan_square((750, 850), 0, 100)


def test_square_is_closed_and_ccw_from_bottom_left(ref):
    plan = plan_square((750, 850), 200, 100)
    assert tuple(plan.start) == (650, 750)
    corners = [tuple(s.end) for s in plan.segments]
    assert corners == [(850, 750), (850, 950), (650, 950), (650, 750)]
    pts = list(sample(plan, ref, 0.01))
    assert tuple(pts[0].pose) == (650, 750)
    np.testing.assert_allclose(pts[-1].pose, (650, 750), atol=1e-9)


def test_sample_count_for_segment():
    line = plan_line((650, 750), (850, 750), 100, accel=1000)
    assert sample_count(line, 0.01) == 211


def test_samples_follow_profile(ref):
    plan = plan_square((750, 850), 200, 100)
    t, poses = sample_array(plan, 0.01)
    assert np.all(np.diff(t) > 0)
    speeds = np.linalg.norm(np.diff(poses, axis=0), axis=1) / 0.01
    assert speeds.max() <= 100 + 1e-6


def test_plan_round_trip(tmp_path):
    plan = plan_square((750, 850), 200, 1000)
    path = tmp_path / "plan.json"
    save_plan(plan, path)
    again = load_plan(path)
    assert again == plan
    assert json.loads(path.read_text())["speed_mmps"] == 1000
    assert TrajectoryPlan.from_dict(plan.to_dict()) == plan
