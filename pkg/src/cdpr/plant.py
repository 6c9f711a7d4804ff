"""Fixed-step simulator of a planar cable robot with a point-mass effector.

Each cable is a servo axis that pays out a commanded length, followed by a
unilateral spring-damper: the cable pulls when the attachment-to-anchor
distance exceeds the paid-out length and goes slack otherwise. The effector is
integrated with semi-implicit Euler.

``mode="ideal"`` keeps the servo axes but replaces the cable/effector dynamics
by rigid kinematics: the pose is the forward kinematics of the axis lengths.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometry, NumericalBlowup, Unsupported, ValidationError
from .kinematics import (cable_vectors, forward_kinematics_closed,
                         forward_kinematics_numeric, inverse_kinematics)
from .model import Pose, RobotDescription
from .statics import solve_tensions

MODES = ("dynamic", "ideal")
MAX_SPEED_MM_S = 1e6


@dataclass(frozen=True)
class PlantConfig:
    dt: float = 0.001
    stiffness: float = 50.0          # N/mm
    damping: float = 0.5             # N*s/mm
    axis_max_speed: float = 2000.0   # mm/s
    axis_time_constant: float = 0.002  # s
    mode: str = "dynamic"

    def violations(self, desc: RobotDescription | None = None) -> list[str]:
        out = []
        if not self.dt > 0:
            out.append("dt must be > 0")
        if not self.stiffness > 0:
            out.append("stiffness must be > 0")
        if not self.damping >= 0:
            out.append("damping must be >= 0")
        if not self.axis_max_speed > 0:
            out.append("axis_max_speed must be > 0")
        if not self.axis_time_constant > 0:
            out.append("axis_time_constant must be > 0")
        if self.mode not in MODES:
            out.append(f"mode must be one of {MODES}")
        if desc is not None and not out and self.mode == "dynamic":
            # all cables pulling in parallel is the stiffest case
            omega = math.sqrt(1000.0 * self.stiffness * desc.cable_count / desc.ee_mass)
            if not self.dt < 2.0 / omega:
                out.append(f"dt must be < 2/omega = {2.0 / omega:.3g} s for stability")
        return out

    def validate(self, desc: RobotDescription | None = None) -> "PlantConfig":
        bad = self.violations(desc)
        if bad:
            raise ValidationError(bad)
        return self

    def to_dict(self) -> dict:
        return {
            "dt_s": self.dt,
            "stiffness_n_per_mm": self.stiffness,
            "damping_ns_per_mm": self.damping,
            "axis_max_speed_mmps": self.axis_max_speed,
            "axis_time_constant_s": self.axis_time_constant,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlantConfig":
        keys = {
            "dt_s": "dt",
            "stiffness_n_per_mm": "stiffness",
            "damping_ns_per_mm": "damping",
            "axis_max_speed_mmps": "axis_max_speed",
            "axis_time_constant_s": "axis_time_constant",
            "mode": "mode",
        }
        unknown = set(data) - set(keys)
        if unknown:
            raise ValidationError(f"unknown plant config keys: {sorted(unknown)}")
        kwargs = {keys[k]: (v if k == "mode" else float(v)) for k, v in data.items()}
        return cls(**kwargs).validate()


def load_plant_config(path) -> PlantConfig:
    return PlantConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PlantState:
    p: np.ndarray        # mm
    v: np.ndarray        # mm/s
    axis: np.ndarray     # paid-out cable lengths, mm
    tensions: np.ndarray  # N
    steps: int
    dt: float

    @property
    def t(self) -> float:
        return self.steps * self.dt


def init_state(desc: RobotDescription, start, cfg: PlantConfig | None = None) -> PlantState:
    """Effector at rest at ``start`` with every axis at the matching cable length."""
    cfg = cfg or PlantConfig()
    p = np.array(start, dtype=float)
    tensions = np.clip(solve_tensions(desc, p), 0.0, None)
    return PlantState(p=p, v=np.zeros(2), axis=inverse_kinematics(desc, p),
                      tensions=tensions, steps=0, dt=cfg.dt)


def _axis_update(cfg: PlantConfig, axis: np.ndarray, command: np.ndarray) -> np.ndarray:
    gain = min(1.0, cfg.dt / cfg.axis_time_constant)
    limit = cfg.axis_max_speed * cfg.dt
    return axis + np.clip(gain * (command - axis), -limit, limit)


class SetpointInterpolator:
    """Turns a setpoint per controller cycle into a reference per plant step.

    Drives interpolate position setpoints the same way: after a new setpoint
    arrives the reference heads, over one cycle, for the setpoint plus its
    last increment, then holds. With setpoints on time this is a pure
    velocity feed-forward; late or bunched setpoints bend the ramp instead of
    making the reference jump. Without it the servo sees a staircase and the
    unilateral cables slap slack and taut at high speed.
    """

    def __init__(self, initial, steps_per_cycle: int):
        self.steps_per_cycle = max(1, int(steps_per_cycle))
        self.last = np.array(initial, dtype=float)
        self.ref = self.last.copy()
        self._from = self.ref.copy()
        self._to = self.ref.copy()
        self.since = self.steps_per_cycle

    def latch(self, command) -> None:
        command = np.array(command, dtype=float)
        self._from = self.ref.copy()
        self._to = 2.0 * command - self.last
        self.last = command
        self.since = 0

    def next(self) -> np.ndarray:
        """Reference for the coming step; call once per step."""
        self.since = min(self.since + 1, self.steps_per_cycle)
        frac = self.since / self.steps_per_cycle
        self.ref = self._from + (self._to - self._from) * frac
        return self.ref


def cable_tensions(desc: RobotDescription, cfg: PlantConfig, p, v, axis, axis_rate):
    """Unilateral spring-damper tensions and the unit vectors they act along."""
    vec = cable_vectors(desc, p)
    d = np.linalg.norm(vec, axis=-1)
    if np.any(d < 1e-9):
        raise DegenerateGeometry("attachment point coincides with an anchor")
    u = vec / d[:, None]
    stretch = d - axis
    stretch_rate = -(u @ v) - axis_rate
    t = np.where(stretch > 0.0,
                 np.maximum(0.0, cfg.stiffness * stretch + cfg.damping * stretch_rate),
                 0.0)
    return t, u, stretch


def step(desc: RobotDescription, cfg: PlantConfig, state: PlantState, command) -> PlantState:
    """Advance the plant by one time step ``cfg.dt`` holding ``command``."""
    command = np.asarray(command, dtype=float)
    axis = _axis_update(cfg, state.axis, command)
    dt = cfg.dt
    if cfg.mode == "ideal":
        p = _ideal_pose(desc, axis, state.p)
        v = (p - state.p) / dt
        try:
            tensions = np.clip(solve_tensions(desc, p), 0.0, None)
        except (DegenerateGeometry, Unsupported):
            tensions = np.zeros(desc.cable_count)
    else:
        axis_rate = (axis - state.axis) / dt
        tensions, u, _ = cable_tensions(desc, cfg, state.p, state.v, axis, axis_rate)
        acc = 1000.0 * (tensions @ u) / desc.ee_mass
        acc[1] -= desc.gravity_mm
        v = state.v + acc * dt
        p = state.p + v * dt
    if not np.all(np.isfinite(v)) or np.hypot(*v) > MAX_SPEED_MM_S:
        raise NumericalBlowup(f"effector speed {np.hypot(*v):.3g} mm/s at t={state.t:.4f} s")
    return PlantState(p=p, v=v, axis=axis, tensions=tensions, steps=state.steps + 1, dt=dt)


def _ideal_pose(desc: RobotDescription, axis, previous) -> np.ndarray:
    if desc.cable_count == 2:
        try:
            return forward_kinematics_closed(desc, axis).p
        except Unsupported:
            pass
    return forward_kinematics_numeric(desc, axis, previous).p


def measure(state: PlantState):
    """Read-only snapshot ``(pose, axis lengths, tensions, t)``."""
    return (Pose(float(state.p[0]), float(state.p[1])), state.axis.copy(),
            state.tensions.copy(), state.t)


def mechanical_energy(desc: RobotDescription, cfg: PlantConfig, state: PlantState) -> float:
    """Kinetic + gravitational + cable spring energy in J (zero height at y=0)."""
    v = state.v / 1000.0
    kinetic = 0.5 * desc.ee_mass * float(v @ v)
    potential = desc.ee_mass * desc.gravity * state.p[1] / 1000.0
    d = inverse_kinematics(desc, state.p)
    stretch = np.maximum(d - state.axis, 0.0)
    spring = 0.5 * cfg.stiffness * float(stretch @ stretch) / 1000.0
    return kinetic + potential + spring


def simulate(desc: RobotDescription, cfg: PlantConfig, start, commands, steps_per_command=1):
    """Run the plant over a sequence of commands; returns the list of states after each command."""
    state = init_state(desc, start, cfg)
    out = []
    for cmd in commands:
        for _ in range(steps_per_command):
            state = step(desc, cfg, state, cmd)
        out.append(state)
    return out


def with_mode(cfg: PlantConfig, mode: str) -> PlantConfig:
    return replace(cfg, mode=mode).validate()

