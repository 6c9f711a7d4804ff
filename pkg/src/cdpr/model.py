"""Robot description types, validation and (de)serialization.

Coordinates follow the frame convention used throughout the package: origin at
the bottom-left corner of the base frame, x to the right, y up. Lengths are in
mm, masses in kg, forces in N, time in s.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ValidationError

SUPPORTED_DOF = (2, 3, 6)
WARNING_PREFIX = "warning: "

_REQUIRED_KEYS = {
    "anchors",
    "ee_width_mm",
    "ee_height_mm",
    "ee_mass_kg",
    "tension_min_n",
    "tension_max_n",
    "dof",
}
_OPTIONAL_KEYS = {"gravity_mps2"}


class Vec2(NamedTuple):
    x: float
    y: float


class Pose(NamedTuple):
    """Position of the end-effector center. Orientation is fixed to identity."""

    x: float
    y: float

    @property
    def p(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class RobotDescription:
    anchors: tuple[Vec2, ...]
    ee_width: float
    ee_height: float
    ee_mass: float
    tension_min: float
    tension_max: float
    dof: int = 2
    gravity: float = 9.81
    _anchor_array: np.ndarray = field(init=False, repr=False, compare=False)
    _attach_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        anchors = tuple(Vec2(float(a[0]), float(a[1])) for a in self.anchors)
        object.__setattr__(self, "anchors", anchors)
        arr = np.array(anchors, dtype=float).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "_anchor_array", arr)
        att = _attachment_points(arr, self.ee_width, self.ee_height)
        att.setflags(write=False)
        object.__setattr__(self, "_attach_array", att)

    @property
    def cable_count(self) -> int:
        return len(self.anchors)

    @property
    def anchor_array(self) -> np.ndarray:
        """(m, 2) anchor coordinates a_i."""
        return self._anchor_array

    @property
    def attachments(self) -> np.ndarray:
        """(m, 2) attachment points b_i relative to the end-effector center."""
        return self._attach_array

    @property
    def gravity_mm(self) -> float:
        """Gravitational acceleration in mm/s^2."""
        return self.gravity * 1000.0

    def to_dict(self) -> dict:
        return {
            "anchors": [[a.x, a.y] for a in self.anchors],
            "ee_width_mm": self.ee_width,
            "ee_height_mm": self.ee_height,
            "ee_mass_kg": self.ee_mass,
            "tension_min_n": self.tension_min,
            "tension_max_n": self.tension_max,
            "dof": self.dof,
            "gravity_mps2": self.gravity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RobotDescription":
        if not isinstance(data, dict):
            raise ValidationError("robot description must be a JSON object")
        unknown = set(data) - _REQUIRED_KEYS - _OPTIONAL_KEYS
        if unknown:
            raise ValidationError(f"unknown keys: {sorted(unknown)}")
        missing = _REQUIRED_KEYS - set(data)
        if missing:
            raise ValidationError(f"missing keys: {sorted(missing)}")
        anchors = data["anchors"]
        if not isinstance(anchors, list) or not all(
            isinstance(a, (list, tuple)) and len(a) == 2 for a in anchors
        ):
            raise ValidationError("anchors must be a list of [x, y] pairs")
        dof = data["dof"]
        if isinstance(dof, bool) or not isinstance(dof, int):
            raise ValidationError("dof must be an integer")
        try:
            return cls(
                anchors=tuple(Vec2(float(x), float(y)) for x, y in anchors),
                ee_width=float(data["ee_width_mm"]),
                ee_height=float(data["ee_height_mm"]),
                ee_mass=float(data["ee_mass_kg"]),
                tension_min=float(data["tension_min_n"]),
                tension_max=float(data["tension_max_n"]),
                dof=dof,
                gravity=float(data.get("gravity_mps2", 9.81)),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"non-numeric field: {exc}") from exc


def _attachment_points(anchors: np.ndarray, width: float, height: float) -> np.ndarray:
    # Each cable attaches to the end-effector corner facing its anchor; an anchor
    # centered on the span attaches to the middle of that edge.
    if anchors.size == 0:
        return np.zeros((0, 2))
    mid = 0.5 * (anchors.min(axis=0) + anchors.max(axis=0))
    sx = np.sign(anchors[:, 0] - mid[0])
    sy = np.where(anchors[:, 1] >= mid[1], 1.0, -1.0)
    return np.column_stack([sx * width / 2.0, sy * height / 2.0])


def reference_robot() -> RobotDescription:
    """The 2-cable planar robot: 1500 mm square frame, 120 mm / 1 kg effector."""
    return RobotDescription(
        anchors=(Vec2(0.0, 1500.0), Vec2(1500.0, 1500.0)),
        ee_width=120.0,
        ee_height=120.0,
        ee_mass=1.0,
        tension_min=0.0,
        tension_max=20.0,
        dof=2,
        gravity=9.81,
    )


def validate(desc: RobotDescription) -> list[str]:
    """Return the list of violated invariants (empty when valid).

    Entries starting with ``"warning: "`` are advisory and do not make the
    description unusable.
    """
    out = []
    values = [desc.ee_width, desc.ee_height, desc.ee_mass, desc.tension_min,
              desc.tension_max, desc.gravity]
    if desc.cable_count < 1:
        out.append("cable_count must be >= 1")
    if not all(math.isfinite(v) for a in desc.anchors for v in a):
        out.append("anchors must be finite")
    if not all(math.isfinite(v) for v in values):
        out.append("numeric fields must be finite")
    if not desc.ee_width > 0:
        out.append("ee_width must be > 0")
    if not desc.ee_height > 0:
        out.append("ee_height must be > 0")
    if not desc.ee_mass > 0:
        out.append("ee_mass must be > 0")
    if not desc.tension_min >= 0:
        out.append("tension_min must be >= 0")
    if not desc.tension_min < desc.tension_max:
        out.append("tension_min must be < tension_max")
    if desc.dof not in SUPPORTED_DOF:
        out.append(f"dof must be one of {SUPPORTED_DOF}")
    if desc.gravity < 0:
        out.append("gravity must be >= 0")
    if desc.cable_count == 2 and desc.dof == 2:
        (_, y1), (_, y2) = desc.anchors
        if y1 != y2:
            out.append(WARNING_PREFIX + "planar 2-cable anchors should share the same y")
    return out


def errors_only(violations: Sequence[str]) -> list[str]:
    return [v for v in violations if not v.startswith(WARNING_PREFIX)]


def load_robot(path) -> RobotDescription:
    """Read and validate a robot-description JSON file.

    Raises ``json.JSONDecodeError`` on malformed documents and
    ``ValidationError`` when an invariant is violated. Warnings are tolerated.
    """
    text = Path(path).read_text()
    data = json.loads(text)
    desc = RobotDescription.from_dict(data)
    bad = errors_only(validate(desc))
    if bad:
        raise ValidationError(bad)
    return desc


def save_robot(desc: RobotDescription, path) -> None:
    Path(path).write_text(json.dumps(desc.to_dict(), indent=2) + "\n")


def robot_hash(desc: RobotDescription) -> float:
    """Stable 48-bit digest of a description, exactly representable as a double."""
    blob = json.dumps(desc.to_dict(), sort_keys=True).encode()
    digest = hashlib.sha256(blob).digest()
    return float(int.from_bytes(digest[:6], "little"))
