"""Inverse/forward kinematics and the structure matrix of planar cable robots.

The vector loop for cable i is ``a_i + l_i = p + b_i`` with the rotation fixed
to identity, so ``l_i = |a_i - (p + b_i)|``. ``a_i`` are the anchor points and
``b_i`` the attachment points relative to the effector center
(see :attr:`RobotDescription.attachments`).
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateGeometry, NoConvergence, NoSolution, Unsupported
from .model import Pose, RobotDescription

ZERO_LENGTH_MM = 1e-9
FK_TOL_MM = 1e-9
FK_MAX_ITER = 100
FK_MAX_HALVINGS = 20


def _as_points(pose) -> np.ndarray:
    return np.asarray(pose, dtype=float)


def cable_vectors(desc: RobotDescription, pose) -> np.ndarray:
    """Vectors from each attachment point to its anchor, shape ``(..., m, 2)``."""
    p = _as_points(pose)
    return desc.anchor_array - (p[..., None, :] + desc.attachments)


def inverse_kinematics(desc: RobotDescription, pose) -> np.ndarray:
    """Cable lengths for one pose ``(x, y)`` or an array of poses ``(..., 2)``."""
    return np.linalg.norm(cable_vectors(desc, pose), axis=-1)


def _require_planar_pair(desc: RobotDescription):
    if desc.cable_count != 2:
        raise Unsupported("closed-form forward kinematics needs exactly 2 cables")
    (a1x, a1y), (a2x, a2y) = desc.anchors
    if a1x > a2x:
        raise Unsupported("closed-form forward kinematics expects cable 1 on the left")
    if abs(a1y - a2y) > 1e-9:
        raise Unsupported("closed-form forward kinematics needs anchors at equal height")
    return a1x, a1y, a2x


def forward_kinematics_closed(desc: RobotDescription, lengths) -> Pose:
    """Closed-form position from two cable lengths (lower intersection branch)."""
    a1x, a1y, a2x = _require_planar_pair(desc)
    bx, by = desc.ee_width, desc.ee_height
    l1, l2 = (float(v) for v in lengths)
    den = 2.0 * (a1x - a2x + bx)
    if den == 0.0:
        raise NoSolution("anchor span equals the effector width; x is undetermined")
    px = (a1x**2 - a2x**2 + bx * a1x + bx * a2x - l1**2 + l2**2) / den
    disc = l1**2 - (px - bx / 2.0 - a1x) ** 2
    if not disc >= 0.0:
        raise NoSolution(
            f"cable lengths ({l1:g}, {l2:g}) mm are geometrically inconsistent"
        )
    py = a1y - math.sqrt(disc) - by / 2.0
    return Pose(px, py)


def forward_kinematics_numeric(desc: RobotDescription, lengths, guess, full_output=False):
    """Gauss-Newton solution of ``|a_i - (p + b_i)| = l_i`` starting at ``guess``.

    Works for any cable count. With ``full_output=True`` returns
    ``(pose, info)`` where ``info`` has ``iterations`` and ``residual``.
    """
    target = np.asarray(lengths, dtype=float)
    p = np.array(guess, dtype=float)
    if target.shape != (desc.cable_count,):
        raise ValueError(f"expected {desc.cable_count} lengths, got {target.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("guess must be finite")

    def residual(q):
        return inverse_kinematics(desc, q) - target

    r = residual(p)
    cost = float(r @ r)
    it = 0
    while np.max(np.abs(r)) >= FK_TOL_MM:
        if it >= FK_MAX_ITER:
            raise NoConvergence(
                f"no convergence after {FK_MAX_ITER} iterations", float(np.max(np.abs(r))), it
            )
        it += 1
        vec = cable_vectors(desc, p)
        d = np.linalg.norm(vec, axis=-1)
        if np.any(d < ZERO_LENGTH_MM):
            raise NoConvergence("iterate hit a zero-length cable", float(np.max(np.abs(r))), it)
        jac = -vec / d[:, None]
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        scale = 1.0
        for _ in range(FK_MAX_HALVINGS + 1):
            trial = p + scale * step
            r_trial = residual(trial)
            c_trial = float(r_trial @ r_trial)
            if c_trial < cost or np.max(np.abs(r_trial)) < FK_TOL_MM:
                break
            scale *= 0.5
        else:
            raise NoConvergence(
                "step halving failed to reduce the residual", float(np.max(np.abs(r))), it
            )
        p, r, cost = trial, r_trial, c_trial

    pose = Pose(float(p[0]), float(p[1]))
    if full_output:
        return pose, {"iterations": it, "residual": float(np.max(np.abs(r)))}
    return pose


def structure_matrix(desc: RobotDescription, pose) -> np.ndarray:
    """Map from cable tensions to the wrench they exert on the effector.

    Column i holds the unit vector u_i (attachment toward anchor) and, for
    ``dof=3``, the planar moment ``b_i x u_i`` in N*mm per N.
    """
    if desc.dof not in (2, 3):
        raise Unsupported(f"planar model supports dof 2 and 3, not {desc.dof}")
    vec = cable_vectors(desc, pose)
    d = np.linalg.norm(vec, axis=-1)
    if np.any(d < ZERO_LENGTH_MM):
        i = int(np.argmin(d))
        raise DegenerateGeometry(f"cable {i + 1} has zero length at this pose")
    u = vec / d[:, None]
    if desc.dof == 2:
        return u.T.copy()
    b = desc.attachments
    moment = b[:, 0] * u[:, 1] - b[:, 1] * u[:, 0]
    return np.vstack([u.T, moment])
