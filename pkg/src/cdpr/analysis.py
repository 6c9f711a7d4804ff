"""Post-run analysis: axis time delays and position errors on path segments.

Measured samples in a :class:`LoopLog` are re-timed to the moment the plant
produced them (cycle time minus state age) before anything is compared with
the targets, so the results reflect the command path rather than the round
trip.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CDPRError
from .netloop.looplog import LoopLog
from .trajectory import TrajectoryPlan

MIN_DELAY_SAMPLES = 100
MIN_WINDOW_SAMPLES = 10


class DegenerateSignal(CDPRError):
    """A series has zero variance; its delay is undefined."""


class DelayAnomaly(UserWarning):
    """The correlation peak sits at a negative lag (measured leads target)."""


def _ncc(x: np.ndarray, y: np.ndarray, k: int) -> float:
    n = len(x)
    a, b = (x[:n - k], y[k:]) if k >= 0 else (x[-k:], y[:n + k])
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else -math.inf


def correlation(target, measured, max_lag=None):
    """Normalized cross-correlation for lags ``-max_lag..max_lag``.

    Lag ``k`` pairs ``target[i]`` with ``measured[i + k]``; each overlap is
    mean-removed and normalized separately.
    """
    x = np.asarray(target, dtype=float)
    y = np.asarray(measured, dtype=float)
    if max_lag is None:
        max_lag = len(x) // 2
    lags = np.arange(-max_lag, max_lag + 1)
    return lags, np.array([_ncc(x, y, int(k)) for k in lags])


def estimate_delay(target, measured, cycle, refine=True) -> float:
    """Lag (ms) at which ``measured`` best matches ``target``; positive when it trails.

    Integer lags up to half the series length are searched; with ``refine`` a
    parabola through the peak and its neighbours gives a sub-sample estimate.
    A peak at negative lag is returned as-is with a :class:`DelayAnomaly` warning.
    """
    x = np.asarray(target, dtype=float)
    y = np.asarray(measured, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("target and measured must be 1-D series of equal length")
    if len(x) < MIN_DELAY_SAMPLES:
        raise ValueError(f"need at least {MIN_DELAY_SAMPLES} samples, got {len(x)}")
    if not (np.ptp(x) > 0 and np.ptp(y) > 0):
        raise DegenerateSignal("constant series has no defined delay")
    lags, c = correlation(x, y)
    zero = len(lags) // 2
    pos = zero + int(np.argmax(c[zero:]))
    neg = int(np.argmax(c[:zero])) if zero > 0 else pos
    peak = pos
    if c[neg] > c[pos]:
        peak = neg
        warnings.warn(f"correlation peaks at negative lag {lags[neg]}", DelayAnomaly,
                      stacklevel=2)
    shift = float(lags[peak])
    if refine and 0 < peak < len(c) - 1:
        y0, y1, y2 = c[peak - 1], c[peak], c[peak + 1]
        den = y0 - 2.0 * y1 + y2
        if np.isfinite(den) and den < 0:
            shift += 0.5 * (y0 - y2) / den
    return shift * cycle * 1000.0


def aligned_series(log: LoopLog):
    """Targets and measurements on the log's time grid, measurements re-timed.

    Returns ``(t_us, target, cmd, meas, meas_l)`` restricted to the times that
    are covered by received telemetry (zero-order hold between samples).
    """
    a = log.arrays()
    t = a["t_us"]
    age = a["state_age_us"]
    have = age >= 0
    if not np.any(have):
        raise ValueError("log contains no telemetry")
    origin = (t - age)[have]
    meas, meas_l = a["meas"][have], a["meas_l"][have]
    order = np.argsort(origin, kind="stable")
    origin, meas, meas_l = origin[order], meas[order], meas_l[order]
    keep = np.concatenate([[True], np.diff(origin) > 0])
    origin, meas, meas_l = origin[keep], meas[keep], meas_l[keep]
    covered = (t >= origin[0]) & (t <= origin[-1])
    idx = np.searchsorted(origin, t[covered], side="right") - 1
    return (t[covered], a["target"][covered], a["cmd"][covered], meas[idx], meas_l[idx])


@dataclass
class DelayReport:
    delays_ms: list[float]
    cycle: float
    window: int
    label: str = ""
    anomalies: list[int] = field(default_factory=list)


def delay_report(log: LoopLog, cycle=None, label="") -> DelayReport:
    """Per-axis delay between commanded and measured cable lengths."""
    t, _, cmd, _, meas_l = aligned_series(log)
    if cycle is None:
        cycle = float(np.median(np.diff(t))) / 1e6
    delays, anomalies = [], []
    for i in range(cmd.shape[1]):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DelayAnomaly)
            delays.append(estimate_delay(cmd[:, i], meas_l[:, i], cycle))
        if any(issubclass(w.category, DelayAnomaly) for w in caught):
            anomalies.append(i)
            warnings.warn(f"axis {i + 1}: negative delay estimate", DelayAnomaly, stacklevel=2)
    return DelayReport(delays, cycle, len(t), label, anomalies)


def error_pct(mean_target: float, mean_measured: float) -> float:
    return abs(mean_measured - mean_target) / abs(mean_target) * 100.0


_AXES = {"x": 0, "y": 1}


def segment_error(log: LoopLog, axis: str, window):
    """``(mean_target, mean_measured, error_pct)`` of one coordinate over a time window (s)."""
    col = _AXES[axis]
    t, target, _, meas, _ = aligned_series(log)
    t0, t1 = window
    sel = (t >= round(t0 * 1e6)) & (t <= round(t1 * 1e6))
    if sel.sum() < MIN_WINDOW_SAMPLES:
        raise ValueError(f"window {window} holds {int(sel.sum())} samples, "
                         f"need {MIN_WINDOW_SAMPLES}")
    mt = float(target[sel, col].mean())
    mm = float(meas[sel, col].mean())
    return mt, mm, error_pct(mt, mm)


@dataclass(frozen=True)
class ErrorRow:
    mean_target_a: float
    mean_measured_a: float
    error_a: float
    mean_target_b: float
    mean_measured_b: float
    error_b: float

    @property
    def difference(self) -> float:
        return self.error_a - self.error_b

    def values(self) -> tuple:
        return (self.mean_target_a, self.mean_measured_a, self.error_a,
                self.mean_target_b, self.mean_measured_b, self.error_b, self.difference)


@dataclass
class ErrorReport:
    rows: list[ErrorRow]
    segment_labels: list[str]
    label: str = ""


def compare_logs(log_a: LoopLog, log_b: LoopLog, segments, label="") -> ErrorReport:
    """Position errors of two runs over the same segments and their signed difference.

    ``segments`` is a sequence of ``(label, axis, (t0, t1))``.
    """
    rows, labels = [], []
    for seg_label, axis, window in segments:
        try:
            a = segment_error(log_a, axis, window)
            b = segment_error(log_b, axis, window)
        except ValueError as exc:
            raise ValueError(f"segment {seg_label!r} not covered by both logs: {exc}") from exc
        rows.append(ErrorRow(*a, *b))
        labels.append(seg_label)
    return ErrorReport(rows, labels, label)


def horizontal_windows(plan: TrajectoryPlan, margin=0.1):
    """Cruise windows of the horizontal segments, upper segment first.

    Ramps are excluded and a further ``margin`` of the segment duration is
    trimmed at each end; segments without a cruise phase keep only the margin.
    """
    out = []
    for seg, (t0, t1) in zip(plan.segments, plan.segment_times()):
        if abs(seg.end.y - seg.start.y) > 1e-9 or seg.length == 0:
            continue
        trim = margin * seg.duration
        if seg.cruise_time > 0:
            trim += seg.ramp_time
        out.append((seg.start.y, (t0 + trim, t1 - trim)))
    out.sort(key=lambda item: -item[0])
    names = ["upper", "lower"] + [f"horizontal {i}" for i in range(3, len(out) + 1)]
    return [(names[i], "y", w) for i, (_, w) in enumerate(out)]


ERROR_COLUMNS = ["mean_target_a_mm", "mean_measured_a_mm", "error_a_pct",
                 "mean_target_b_mm", "mean_measured_b_mm", "error_b_pct",
                 "error_difference_pct"]


def _g(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6g}"


def emit_report(reports, path) -> list[Path]:
    """Write CSV and text renderings of delay/error reports into directory ``path``.

    ``reports`` may mix :class:`DelayReport`, :class:`ErrorReport` and
    ``(label, LoopLog)`` pairs; the latter produce aligned series CSVs.
    Returns the written paths.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    delays = [r for r in reports if isinstance(r, DelayReport)]
    errors = [r for r in reports if isinstance(r, ErrorReport)]
    series = [r for r in reports if isinstance(r, tuple)]
    written, text = [], []

    if delays:
        lines = ["label,axis,delay_ms,cycle_ms,window_samples,anomaly"]
        text.append("Axis time delay [ms]")
        for r in delays:
            for i, d in enumerate(r.delays_ms):
                lines.append(f"{r.label},{i + 1},{_g(d)},{_g(r.cycle * 1000)},{r.window},"
                             f"{int(i in r.anomalies)}")
            cells = "  ".join(f"axis {i + 1}: {d:8.1f}" for i, d in enumerate(r.delays_ms))
            text.append(f"  {r.label:<24} {cells}")
        p = out / "delays.csv"
        p.write_text("\n".join(lines) + "\n")
        written.append(p)

    if errors:
        lines = [",".join(ERROR_COLUMNS)]
        text.append("")
        text.append("Position error on horizontal segments")
        text.append(f"  {'':<24} {'target A':>10} {'meas A':>10} {'err A %':>8} "
                    f"{'target B':>10} {'meas B':>10} {'err B %':>8} {'diff %':>8}")
        for r in errors:
            for seg, row in zip(r.segment_labels, r.rows):
                lines.append(",".join(_g(v) for v in row.values()))
                v = row.values()
                text.append(f"  {(r.label + ' ' + seg).strip():<24} {v[0]:10.3f} {v[1]:10.3f} "
                            f"{v[2]:8.3f} {v[3]:10.3f} {v[4]:10.3f} {v[5]:8.3f} {v[6]:8.3f}")
        p = out / "errors.csv"
        p.write_text("\n".join(lines) + "\n")
        written.append(p)

    for label, log in series:
        t, target, cmd, meas, meas_l = aligned_series(log)
        m = cmd.shape[1]
        head = (["t_s", "target_x", "target_y", "meas_x", "meas_y"]
                + [f"cmd_l{i + 1}" for i in range(m)] + [f"meas_l{i + 1}" for i in range(m)])
        lines = [",".join(head)]
        for k in range(len(t)):
            vals = [t[k] / 1e6, *target[k], *meas[k], *cmd[k], *meas_l[k]]
            lines.append(",".join(_g(v) for v in vals))
        p = out / f"series_{label}.csv"
        p.write_text("\n".join(lines) + "\n")
        written.append(p)

    if text:
        p = out / "report.txt"
        p.write_text("\n".join(text) + "\n")
        written.append(p)
    return written
