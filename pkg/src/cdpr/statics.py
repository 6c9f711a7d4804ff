"""Static equilibrium: gravity wrench, tension distribution and workspace maps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from .errors import CDPRError, DegenerateGeometry, Unsupported
from .kinematics import structure_matrix
from .model import RobotDescription

RANK_TOL = 1e-10
RESIDUAL_TOL_N = 1e-9
BOUND_TOL_N = 1e-9


def gravity_wrench(desc: RobotDescription) -> np.ndarray:
    """Wrench the cables must supply to hold the effector: ``(0, m*g[, 0])`` in N."""
    w = np.zeros(desc.dof)
    w[1] = desc.ee_mass * desc.gravity
    return w


def _center_lambda(tp, nu, lo_t, hi_t):
    # Feasible lambda interval from lo_t <= tp + lam*nu <= hi_t.
    lo, hi = -math.inf, math.inf
    for t, n in zip(tp, nu):
        if abs(n) < 1e-15:
            continue
        a, b = (lo_t - t) / n, (hi_t - t) / n
        if a > b:
            a, b = b, a
        lo, hi = max(lo, a), min(hi, b)
    fixed_ok = all(lo_t <= t <= hi_t for t, n in zip(tp, nu) if abs(n) < 1e-15)
    if lo <= hi and fixed_ok:
        return 0.5 * (lo + hi)
    # No feasible lambda: minimize the worst bound violation s.
    # variables (lam, s); minimize s
    a_ub, b_ub = [], []
    for t, n in zip(tp, nu):
        a_ub.append([-n, -1.0])
        b_ub.append(t - lo_t)
        a_ub.append([n, -1.0])
        b_ub.append(hi_t - t)
    res = linprog(
        c=[0.0, 1.0], A_ub=a_ub, b_ub=b_ub,
        bounds=[(None, None), (None, None)], method="highs",
    )
    if not res.success:
        raise CDPRError(f"tension distribution LP failed: {res.message}")
    return float(res.x[0])


def solve_tensions(desc: RobotDescription, pose) -> np.ndarray:
    """Cable tensions balancing gravity at ``pose``.

    For as many cables as degrees of freedom the balance has a unique solution.
    With one redundant cable, the free parameter along the nullspace is chosen
    to center the tensions inside the tension bounds (or, if impossible, to
    minimize the worst bound violation).
    """
    n, m = desc.dof, desc.cable_count
    if m > n + 1:
        raise Unsupported(f"{m} cables for {n} dof: more than one redundant cable")
    a = structure_matrix(desc, pose)
    b = gravity_wrench(desc)
    u, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    if rank < min(n, m):
        raise DegenerateGeometry("structure matrix is singular at this pose")
    tp = np.linalg.pinv(a, rcond=RANK_TOL) @ b
    if np.max(np.abs(a @ tp - b)) > RESIDUAL_TOL_N:
        raise DegenerateGeometry("gravity wrench is outside the span of the cables")
    if m - rank == 0:
        return tp
    nu = vt[-1]
    lam = _center_lambda(tp, nu, desc.tension_min, desc.tension_max)
    return tp + lam * nu


def within_bounds(desc: RobotDescription, tensions) -> bool:
    """Bounds check with ``BOUND_TOL_N`` slack, so round-off at exactly 0 N counts as 0."""
    t = np.asarray(tensions)
    return bool(np.all(np.isfinite(t)) and np.all(t >= desc.tension_min - BOUND_TOL_N)
                and np.all(t <= desc.tension_max + BOUND_TOL_N))


def is_feasible(desc: RobotDescription, pose):
    """``(feasible, tensions)``; degenerate poses give ``(False, nan tensions)``."""
    try:
        t = solve_tensions(desc, pose)
    except (DegenerateGeometry, Unsupported):
        return False, np.full(desc.cable_count, np.nan)
    return within_bounds(desc, t), t


@dataclass(frozen=True)
class WorkspaceMap:
    """Feasibility and tensions on a regular grid.

    ``feasible`` has shape ``(rows, cols)`` (rows along y), ``tensions`` has
    shape ``(rows, cols, m)`` with NaN for degenerate nodes.
    """

    x0: float
    y0: float
    spacing: float
    xs: np.ndarray
    ys: np.ndarray
    feasible: np.ndarray
    tensions: np.ndarray

    @property
    def cols(self) -> int:
        return len(self.xs)

    @property
    def rows(self) -> int:
        return len(self.ys)

    @property
    def t_max(self) -> np.ndarray:
        t = self.tensions
        if t.shape[-1] == 0 or t.size == 0:
            return np.full(t.shape[:-1], np.nan)
        out = np.full(t.shape[:-1], np.nan)
        ok = ~np.isnan(t).any(axis=-1)
        out[ok] = t[ok].max(axis=-1)
        return out

    @property
    def feasible_count(self) -> int:
        return int(self.feasible.sum())

    @property
    def feasible_area(self) -> float:
        return self.feasible_count * self.spacing**2

    def lookup(self, x, y):
        """Grid indices (row, col) of the node at (x, y)."""
        col = int(round((x - self.x0) / self.spacing))
        row = int(round((y - self.y0) / self.spacing))
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            raise KeyError((x, y))
        return row, col


def _axis(lo, hi, spacing):
    if hi < lo:
        return np.zeros(0)
    count = int(math.floor((hi - lo) / spacing + 1e-9)) + 1
    return lo + spacing * np.arange(count)


def workspace_scan(desc: RobotDescription, x_range=(0.0, 1500.0), y_range=(0.0, 1500.0),
                   spacing=10.0) -> WorkspaceMap:
    """Evaluate :func:`is_feasible` on every node of a regular grid."""
    if not spacing > 0:
        raise ValueError("spacing must be > 0")
    xs = _axis(float(x_range[0]), float(x_range[1]), spacing)
    ys = _axis(float(y_range[0]), float(y_range[1]), spacing)
    m = desc.cable_count
    feasible = np.zeros((len(ys), len(xs)), dtype=bool)
    tensions = np.full((len(ys), len(xs), m), np.nan)
    for r, y in enumerate(ys):
        for c, x in enumerate(xs):
            ok, t = is_feasible(desc, (x, y))
            feasible[r, c] = ok
            tensions[r, c] = t
    return WorkspaceMap(float(x_range[0]), float(y_range[0]), float(spacing), xs, ys,
                        feasible, tensions)


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6g}"


def export_map(wmap: WorkspaceMap, path) -> None:
    """Write the map as CSV, one row per node, x varying fastest from (x_min, y_min)."""
    m = wmap.tensions.shape[-1]
    header = ["x_mm", "y_mm", "feasible", "t_max_n"] + [f"t{i + 1}_n" for i in range(m)]
    lines = [",".join(header)]
    tmax = wmap.t_max
    for r, y in enumerate(wmap.ys):
        for c, x in enumerate(wmap.xs):
            row = [_fmt(x), _fmt(y), "1" if wmap.feasible[r, c] else "0", _fmt(tmax[r, c])]
            row += [_fmt(t) for t in wmap.tensions[r, c]]
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
