"""Straight-line paths with trapezoidal speed profiles, sampled at a fixed cycle."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import inverse_kinematics
from .model import Pose, RobotDescription, Vec2

DEFAULT_ACCEL = 2000.0
DEFAULT_CYCLE = 0.01
MIN_CYCLE, MAX_CYCLE = 0.001, 0.05


@dataclass(frozen=True)
class Segment:
    start: Vec2
    end: Vec2
    speed: float
    accel: float

    def __post_init__(self):
        object.__setattr__(self, "start", Vec2(*map(float, self.start)))
        object.__setattr__(self, "end", Vec2(*map(float, self.end)))
        if not self.speed > 0:
            raise ValueError("segment speed must be > 0")
        if not self.accel > 0:
            raise ValueError("segment acceleration must be > 0")

    @property
    def length(self) -> float:
        return math.hypot(self.end.x - self.start.x, self.end.y - self.start.y)

    @property
    def peak_speed(self) -> float:
        return min(self.speed, math.sqrt(self.accel * self.length))

    @property
    def ramp_time(self) -> float:
        return self.peak_speed / self.accel

    @property
    def cruise_time(self) -> float:
        v = self.peak_speed
        return (self.length - v * v / self.accel) / v if v > 0 else 0.0

    @property
    def is_triangular(self) -> bool:
        return self.speed * self.speed / self.accel > self.length

    @property
    def duration(self) -> float:
        return 2.0 * self.ramp_time + max(self.cruise_time, 0.0)

    def distance(self, t: float) -> float:
        """Distance travelled after ``t`` seconds into the segment."""
        v, a = self.peak_speed, self.accel
        ta, tc = self.ramp_time, max(self.cruise_time, 0.0)
        if t <= 0.0:
            return 0.0
        if t < ta:
            return 0.5 * a * t * t
        if t < ta + tc:
            return 0.5 * a * ta * ta + v * (t - ta)
        if t < 2 * ta + tc:
            rem = 2 * ta + tc - t
            return self.length - 0.5 * a * rem * rem
        return self.length

    def position(self, t: float) -> Pose:
        L = self.length
        if L == 0.0:
            return Pose(self.start.x, self.start.y)
        if t >= self.duration:
            return Pose(self.end.x, self.end.y)
        f = self.distance(t) / L
        return Pose(self.start.x + f * (self.end.x - self.start.x),
                    self.start.y + f * (self.end.y - self.start.y))


@dataclass(frozen=True)
class TrajectoryPlan:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("a plan needs at least one segment")
        for prev, nxt in zip(self.segments, self.segments[1:]):
            if prev.end != nxt.start:
                raise ValueError("segments must be contiguous")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def start(self) -> Vec2:
        return self.segments[0].start

    def segment_times(self) -> list[tuple[float, float]]:
        out, t = [], 0.0
        for s in self.segments:
            out.append((t, t + s.duration))
            t += s.duration
        return out

    def position(self, t: float) -> Pose:
        t0 = 0.0
        for seg in self.segments:
            if t < t0 + seg.duration:
                return seg.position(t - t0)
            t0 += seg.duration
        end = self.segments[-1].end
        return Pose(end.x, end.y)

    def to_dict(self) -> dict:
        first = self.segments[0]
        return {
            "speed_mmps": first.speed,
            "accel_mmps2": first.accel,
            "segments": [
                {"start": list(s.start), "end": list(s.end),
                 "speed_mmps": s.speed, "accel_mmps2": s.accel}
                for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrajectoryPlan":
        speed = data.get("speed_mmps")
        accel = data.get("accel_mmps2", DEFAULT_ACCEL)
        segs = []
        for s in data["segments"]:
            segs.append(Segment(tuple(s["start"]), tuple(s["end"]),
                                float(s.get("speed_mmps", speed)),
                                float(s.get("accel_mmps2", accel))))
        return cls(tuple(segs))


def save_plan(plan: TrajectoryPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n")


def load_plan(path) -> TrajectoryPlan:
    return TrajectoryPlan.from_dict(json.loads(Path(path).read_text()))


def plan_line(start, end, speed, accel=DEFAULT_ACCEL) -> TrajectoryPlan:
    return TrajectoryPlan((Segment(tuple(start), tuple(end), speed, accel),))


def plan_square(center, side, speed, accel=DEFAULT_ACCEL) -> TrajectoryPlan:
    """Counter-clockwise square starting at the bottom-left corner.

    Every side starts and ends at rest.
    """
    if not side > 0:
        raise ValueError("side must be > 0")
    if not speed > 0 or not accel > 0:
        raise ValueError("speed and acceleration must be > 0")
    cx, cy = center
    h = side / 2.0
    corners = [(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
    return TrajectoryPlan(tuple(
        Segment(corners[i], corners[(i + 1) % 4], speed, accel) for i in range(4)
    ))


@dataclass(frozen=True)
class Setpoint:
    t: float
    pose: Pose
    lengths: np.ndarray


def sample_count(plan: TrajectoryPlan, cycle: float) -> int:
    return int(math.ceil(plan.duration / cycle - 1e-9)) + 1


def sample(plan: TrajectoryPlan, desc: RobotDescription, cycle: float = DEFAULT_CYCLE):
    """Yield setpoints at ``t = k * cycle`` until the plan's end is reached."""
    if not cycle > 0:
        raise ValueError("cycle must be > 0")
    for k in range(sample_count(plan, cycle)):
        t = k * cycle
        pose = plan.position(t)
        yield Setpoint(t, pose, inverse_kinematics(desc, pose))


def sample_array(plan: TrajectoryPlan, cycle: float = DEFAULT_CYCLE):
    """``(times, poses)`` arrays of the sampled path (no kinematics)."""
    n = sample_count(plan, cycle)
    t = cycle * np.arange(n)
    return t, np.array([plan.position(ti) for ti in t])
