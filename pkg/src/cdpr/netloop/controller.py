"""Cyclic controller: streams setpoints from a trajectory plan and logs telemetry."""
from __future__ import annotations

import logging
import threading
import time

import numpy as np

from ..model import RobotDescription, robot_hash
from ..trajectory import TrajectoryPlan, sample
from .looplog import LoopLog
from .protocol import (Endpoint, ErrorCode, FrameError, MsgType, ProtocolError, connect)

log = logging.getLogger(__name__)


def _expect(conn: Endpoint, msg_type):
    f = conn.recv()
    if f.msg_type == MsgType.ERROR:
        code = int(f.payload[0]) if f.payload else ErrorCode.INTERNAL
        raise ProtocolError(f"peer reported error {ErrorCode(code).name}", code)
    if f.msg_type != msg_type:
        raise ProtocolError(f"expected {MsgType(msg_type).name}, got {f.msg_type:#x}")
    return f


def _handshake(conn: Endpoint, desc: RobotDescription, cycle_us: int, simulated: bool,
               start) -> None:
    h = robot_hash(desc)
    conn.send(MsgType.HELLO, [h])
    reply = _expect(conn, MsgType.HELLO)
    if reply.payload[0] != h:
        raise ProtocolError("robot description hash differs", ErrorCode.HASH_MISMATCH)
    conn.send(MsgType.CONFIG, [float(cycle_us), 1.0 if simulated else 0.0, start.x, start.y])
    _expect(conn, MsgType.CONFIG)


def _state_fields(f, m):
    p = f.payload
    return np.array(p[0:2]), np.array(p[2:2 + m]), np.array(p[2 + m:2 + 2 * m])


def run_controller(desc: RobotDescription, plan: TrajectoryPlan, cycle: float,
                   plant_endpoint, log_path=None, simulated=True) -> LoopLog:
    """Stream the sampled plan to the plant (possibly via a gateway).

    Opens the connection before anything else, so an unreachable endpoint
    raises ``ConnectionError`` without writing a log. A connection lost
    mid-run returns the partial log with ``truncated`` set.
    """
    cycle_us = int(round(cycle * 1e6))
    try:
        sock = connect(plant_endpoint)
    except OSError as exc:
        raise ConnectionError(f"cannot reach plant at {plant_endpoint}: {exc}") from exc
    conn = Endpoint(sock)
    m = desc.cable_count
    looplog = LoopLog(m)
    setpoints = list(sample(plan, desc, cycle))
    try:
        _handshake(conn, desc, cycle_us, simulated, plan.start)
        if simulated:
            _run_simulated(conn, setpoints, cycle_us, looplog, m)
        else:
            _run_realtime(conn, setpoints, cycle_us, looplog, m)
    except (EOFError, FrameError, ConnectionError, OSError) as exc:
        looplog.truncated = f"connection lost after {len(looplog)} cycles ({exc})"
        log.warning(looplog.truncated)
    finally:
        conn.close()
    if log_path is not None:
        looplog.write(log_path)
    return looplog


def _run_simulated(conn, setpoints, cycle_us, looplog, m):
    conn.send(MsgType.START)
    _expect(conn, MsgType.START)
    newest = None
    nan2, nanm = np.full(2, np.nan), np.full(m, np.nan)
    t_us = 0
    for k, sp in enumerate(setpoints):
        t_us = k * cycle_us
        conn.send(MsgType.TIMESYNC_REQ, [float(t_us)], t_us)
        while True:
            f = conn.recv()
            if f.msg_type == MsgType.TIMESYNC_REP:
                break
            if f.msg_type == MsgType.STATE:
                newest = f
            elif f.msg_type == MsgType.ERROR:
                raise ProtocolError(f"plant error {f.payload}")
        if newest is None:
            meas, meas_l, tens, age = nan2, nanm, nanm, -1
        else:
            meas, meas_l, tens = _state_fields(newest, m)
            age = t_us - newest.t_send_us
        conn.send(MsgType.SETPOINT, sp.lengths, t_us)
        looplog.append(t_us, sp.pose, sp.lengths, meas, meas_l, tens, age)
    conn.send(MsgType.STOP, (), t_us)
    _drain_until_stop(conn)


def _drain_until_stop(conn):
    try:
        while conn.recv().msg_type not in (MsgType.STOP, MsgType.ERROR):
            pass
    except (EOFError, OSError):
        pass


def _clock_offset(conn, rounds=5) -> int:
    """Plant clock minus controller clock, midpoint of the fastest round trip."""
    best = None
    for _ in range(rounds):
        t0 = time.monotonic_ns() // 1000
        conn.send(MsgType.TIMESYNC_REQ, [float(t0)], t0)
        rep = _expect(conn, MsgType.TIMESYNC_REP)
        t1 = time.monotonic_ns() // 1000
        if best is None or t1 - t0 < best[0]:
            best = (t1 - t0, int(rep.payload[0]) - (t0 + t1) // 2)
    return best[1]


def _run_realtime(conn, setpoints, cycle_us, looplog, m):
    offset = _clock_offset(conn)
    conn.send(MsgType.START)
    _expect(conn, MsgType.START)
    lock = threading.Lock()
    latest = {"frame": None, "error": None, "done": False}

    def reader():
        try:
            while True:
                f = conn.recv()
                with lock:
                    if f.msg_type == MsgType.STATE:
                        latest["frame"] = f
                    elif f.msg_type == MsgType.ERROR:
                        latest["error"] = f
                        break
                    elif f.msg_type == MsgType.STOP:
                        break
        except (EOFError, FrameError, OSError) as exc:
            with lock:
                if latest["error"] is None and not latest["done"]:
                    latest["error"] = exc
        finally:
            with lock:
                latest["done"] = True

    th = threading.Thread(target=reader, name="controller-reader", daemon=True)
    th.start()
    nan2, nanm = np.full(2, np.nan), np.full(m, np.nan)
    clock0 = time.monotonic_ns() // 1000
    for k, sp in enumerate(setpoints):
        due = clock0 + k * cycle_us
        wait = (due - time.monotonic_ns() // 1000) / 1e6
        if wait > 0:
            time.sleep(wait)
        now = time.monotonic_ns() // 1000
        with lock:
            f, err = latest["frame"], latest["error"]
        if err is not None:
            raise ConnectionError(f"lost plant: {err}")
        if f is None:
            meas, meas_l, tens, age = nan2, nanm, nanm, -1
        else:
            meas, meas_l, tens = _state_fields(f, m)
            age = now - (f.t_send_us - offset)
        conn.send(MsgType.SETPOINT, sp.lengths, now)
        looplog.append(now - clock0, sp.pose, sp.lengths, meas, meas_l, tens, age)
    with lock:
        latest["done"] = True
    conn.send(MsgType.STOP, (), time.monotonic_ns() // 1000)
    th.join(timeout=max(5.0, 10 * cycle_us / 1e6))

