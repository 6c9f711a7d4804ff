import json

import pytest

from cdpr.errors import ValidationError
from cdpr.model import (RobotDescription, errors_only, load_robot, reference_robot,
                        robot_hash, save_robot, validate)


def test_reference_robot_values(ref):
    assert [tuple(a) for a in ref.anchors] == [(0, 1500), (1500, 1500)]
    assert ref.ee_width == 120 and ref.ee_mass == 1
    assert (ref.tension_min, ref.tension_max) == (0, 20)
    assert ref.cable_count == 2
    assert ref.gravity == 9.81


def test_attachments_face_their_anchor(ref):
    assert ref.attachments.tolist() == [[-60, 60], [60, 60]]


def test_validate_reference_is_clean(ref):
    assert validate(ref) == []


def test_zero_mass_message(ref):
    d = RobotDescription(ref.anchors, 120, 120, 0.0, 0, 20)
    assert validate(d) == ["ee_mass must be > 0"]


def test_unequal_anchor_height_is_only_a_warning():
    d = RobotDescription(((0, 1500), (1500, 1400)), 120, 120, 1, 0, 20)
    v = validate(d)
    assert len(v) == 1 and v[0].startswith("warning: ")
    assert errors_only(v) == []


def test_round_trip_file(tmp_path, ref):
    path = tmp_path / "ref.json"
    save_robot(ref, path)
    assert load_robot(path) == ref


def test_inverted_tension_limits_rejected(tmp_path, ref):
    data = ref.to_dict()
    data["tension_min_n"], data["tension_max_n"] = 20, 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ValidationError) as info:
        load_robot(path)
    assert "tension_min must be < tension_max" in info.value.violations


def test_three_anchors_dof2_accepted(tmp_path, ref):
    data = ref.to_dict()
    data["anchors"].append([750, 0])
    path = tmp_path / "three.json"
    path.write_text(json.dumps(data))
    d = load_robot(path)
    assert d.cable_count == 3
    assert d.attachments.tolist()[2] == [0, -60]


def test_unknown_and_missing_keys(ref):
    data = ref.to_dict()
    data["colour"] = "red"
    with pytest.raises(ValidationError):
        RobotDescription.from_dict(data)
    data = ref.to_dict()
    del data["dof"]
    with pytest.raises(ValidationError):
        RobotDescription.from_dict(data)


def test_malformed_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    with pytest.raises(json.JSONDecodeError):
        load_robot(path)


def test_hash_is_stable_and_sensitive(ref):
    assert robot_hash(ref) == robot_hash(reference_robot())
    heavier = RobotDescription(ref.anchors, 120, 120, 2.0, 0, 20)
    assert robot_hash(heavier) != robot_hash(ref)
    assert robot_hash(ref) == int(robot_hash(ref)) < 2**48
