"""Synthetic loop logs for analysis tests."""
import numpy as np

from cdpr.netloop import LoopLog


def constant_log(target_y, measured_y, n=200, cycle_us=10_000, x=750.0):
    log = LoopLog(2)
    for k in range(n):
        log.append(k * cycle_us, (x, target_y), (1.0, 1.0), (x, measured_y), (1.0, 1.0),
                   (5.0, 5.0), 0)
    return log


def shifted_log(signal, shift, cycle_us=10_000):
    """Commands follow ``signal``; measurements trail by ``shift`` samples."""
    log = LoopLog(2)
    n = len(signal)
    for k in range(n):
        m = signal[max(0, k - shift)]
        log.append(k * cycle_us, (m, m), (signal[k], -signal[k]), (m, m), (m, -m), (1, 1), 0)
    return log


def smooth_signal(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.normal(size=n))
    return np.convolve(x, np.ones(9) / 9, mode="same")
