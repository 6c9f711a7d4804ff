"""Per-cycle controller log and its CSV form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class LoopLog:
    """One row per controller cycle.

    ``meas_*`` hold the newest STATE received before the cycle's setpoint was
    sent (NaN until the first STATE arrives); ``state_age_us`` is the age of
    that STATE on the controller's clock, -1 when none has arrived.
    """

    cable_count: int
    t_us: list = field(default_factory=list)
    target: list = field(default_factory=list)
    cmd: list = field(default_factory=list)
    meas: list = field(default_factory=list)
    meas_l: list = field(default_factory=list)
    tensions: list = field(default_factory=list)
    state_age_us: list = field(default_factory=list)
    truncated: str | None = None

    def append(self, t_us, target, cmd, meas, meas_l, tensions, age_us):
        self.t_us.append(int(t_us))
        self.target.append(np.asarray(target, dtype=float))
        self.cmd.append(np.asarray(cmd, dtype=float))
        self.meas.append(np.asarray(meas, dtype=float))
        self.meas_l.append(np.asarray(meas_l, dtype=float))
        self.tensions.append(np.asarray(tensions, dtype=float))
        self.state_age_us.append(int(age_us))

    def __len__(self):
        return len(self.t_us)

    def arrays(self) -> dict:
        m = self.cable_count
        n = len(self)

        def stack(rows, width):
            return np.array(rows, dtype=float).reshape(n, width)

        return {
            "t_us": np.array(self.t_us, dtype=np.int64),
            "target": stack(self.target, 2),
            "cmd": stack(self.cmd, m),
            "meas": stack(self.meas, 2),
            "meas_l": stack(self.meas_l, m),
            "tensions": stack(self.tensions, m),
            "state_age_us": np.array(self.state_age_us, dtype=np.int64),
        }

    def header(self) -> list[str]:
        m = range(1, self.cable_count + 1)
        return (["t_us", "target_x", "target_y"] + [f"cmd_l{i}" for i in m]
                + ["meas_x", "meas_y"] + [f"meas_l{i}" for i in m]
                + [f"t{i}" for i in m] + ["state_age_us"])

    def to_csv(self) -> str:
        lines = [",".join(self.header())]
        for i in range(len(self)):
            reals = np.concatenate([self.target[i], self.cmd[i], self.meas[i],
                                    self.meas_l[i], self.tensions[i]])
            cells = [str(self.t_us[i])] + [_fmt(v) for v in reals] + [str(self.state_age_us[i])]
            lines.append(",".join(cells))
        if self.truncated:
            lines.append(f"# truncated: {self.truncated}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6g}"


def read_log(path) -> LoopLog:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    m = sum(1 for h in header if h.startswith("cmd_l"))
    log = LoopLog(m)
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# truncated:"):
                log.truncated = line.split(":", 1)[1].strip()
            continue
        cells = line.split(",")
        vals = [float(c) for c in cells[1:-1]]
        log.append(int(cells[0]), vals[0:2], vals[2:2 + m], vals[2 + m:4 + m],
                   vals[4 + m:4 + 2 * m], vals[4 + 2 * m:4 + 3 * m], int(cells[-1]))
    return log
