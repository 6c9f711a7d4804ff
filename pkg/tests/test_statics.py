import math

import numpy as np
import pytest

from cdpr.errors import DegenerateGeometry
from cdpr.kinematics import structure_matrix
from cdpr.model import RobotDescription
from cdpr.statics import (export_map, gravity_wrench, is_feasible, solve_tensions,
                          workspace_scan)


def test_gravity_wrench(ref):
    np.testing.assert_allclose(gravity_wrench(ref), [0, 9.81])
    heavy = RobotDescription(ref.anchors, 120, 120, 2.0, 0, 20)
    np.testing.assert_allclose(gravity_wrench(heavy), [0, 19.62])
    light = RobotDescription(ref.anchors, 120, 120, 0.0, 0, 20)
    np.testing.assert_allclose(gravity_wrench(light), [0, 0])


def test_symmetric_tensions(ref):
    t = solve_tensions(ref, (750, 750))
    np.testing.assert_allclose(t, [9.81 / (2 * math.sin(math.pi / 4))] * 2, atol=1e-9)
    assert t[0] == pytest.approx(6.9367, abs=1e-3)


def test_asymmetric_tensions(ref):
    t = solve_tensions(ref, (600, 800))
    assert t == pytest.approx([7.813, 6.334], abs=1e-3)
    np.testing.assert_allclose(structure_matrix(ref, (600, 800)) @ t, [0, 9.81], atol=1e-12)


def test_degenerate(ref):
    with pytest.raises(DegenerateGeometry):
        solve_tensions(ref, (60, 1440))


def test_feasibility_examples(ref):
    ok, t = is_feasible(ref, (750, 750))
    assert ok and t == pytest.approx([6.937, 6.937], abs=1e-3)
    ok, t = is_feasible(ref, (750, 1435))
    assert not ok and t == pytest.approx([677, 677], rel=0.01)
    ok, t = is_feasible(ref, (-200, 700))
    assert not ok and min(t) < 0


def test_redundant_cable_balances(rng):
    d = RobotDescription(((0, 1500), (1500, 1500), (750, 0)), 120, 120, 1, 0, 20)
    for p in rng.uniform(400, 1100, size=(20, 2)):
        t = solve_tensions(d, p)
        np.testing.assert_allclose(structure_matrix(d, p) @ t, [0, 9.81], atol=1e-9)


def test_scan_examples(ref):
    w = workspace_scan(ref, spacing=10)
    assert w.feasible.shape == (151, 151)
    assert w.feasible[w.lookup(750, 750)]
    assert not w.feasible[w.lookup(750, 1435)]
    assert 0 < w.feasible_count < w.feasible.size


def test_scan_corners_infeasible(ref):
    w = workspace_scan(ref, spacing=1500)
    assert w.feasible.shape == (2, 2) and not w.feasible.any()


def test_scan_empty_range(ref):
    w = workspace_scan(ref, x_range=(10, 0), y_range=(0, 100))
    assert w.feasible.size == 0 and w.feasible_count == 0


def test_scan_rejects_bad_spacing(ref):
    with pytest.raises(ValueError):
        workspace_scan(ref, spacing=-1)


def test_export(tmp_path, ref):
    w = workspace_scan(ref, (700, 710), (700, 710), spacing=10)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    export_map(w, a)
    export_map(w, b)
    lines = a.read_text().splitlines()
    assert len(lines) == 5
    assert lines[0].startswith("x_mm,y_mm,feasible,t_max_n,t1_n,t2_n")
    assert a.read_bytes() == b.read_bytes()


def test_export_reference_row(tmp_path, ref):
    w = workspace_scan(ref, (740, 760), (740, 760), spacing=10)
    path = tmp_path / "m.csv"
    export_map(w, path)
    row = [r for r in path.read_text().splitlines() if r.startswith("750,750,")]
    assert row and row[0].split(",")[2] == "1"
