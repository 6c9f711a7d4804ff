"""Plant side of the loop: serves one controller session over the frame protocol."""
from __future__ import annotations

import logging
import socket
import threading
import time

from .. import plant as plant_mod
from ..errors import CDPRError
from ..model import RobotDescription, robot_hash
from .protocol import (Endpoint, ErrorCode, FrameError, MsgType, ProtocolError,
                       listen, tune)

log = logging.getLogger(__name__)


def monotonic_us() -> int:
    return time.monotonic_ns() // 1000


class PlantServer:
    """Accepts a single session, then returns from :meth:`serve`.

    Session: HELLO, CONFIG, START, then SETPOINT frames until STOP. In
    simulated-time mode the peer drives the clock with TIMESYNC requests whose
    payload is the virtual time (us) to advance to; the plant steps up to that
    time and answers with a TIMESYNC reply once every STATE due has been sent.
    """

    def __init__(self, desc: RobotDescription, cfg: plant_mod.PlantConfig,
                 endpoint="127.0.0.1:0"):
        self.desc = desc
        self.cfg = cfg.validate(desc)
        self.dt_us = int(round(cfg.dt * 1e6))
        self._srv = listen(endpoint)
        self.address = self._srv.getsockname()
        self.steps_taken = 0
        self.states_sent = 0
        self.state = None
        self._command = None
        self._lock = threading.Lock()

    @property
    def endpoint(self) -> str:
        return f"{self.address[0]}:{self.address[1]}"

    def serve(self, accept_timeout=None) -> None:
        self._srv.settimeout(accept_timeout)
        try:
            sock, peer = self._srv.accept()
        finally:
            self._srv.close()
        sock.settimeout(None)
        log.info("plant session from %s", peer)
        conn = Endpoint(tune(sock))
        try:
            self._session(conn)
        except (EOFError, ConnectionError, OSError) as exc:
            log.info("plant session ended: %s", exc)
        finally:
            conn.close()

    def close(self):
        self._srv.close()

    def _fail(self, conn, code, message):
        log.warning("protocol error (%s): %s", ErrorCode(code).name, message)
        try:
            conn.send(MsgType.ERROR, [float(code)])
        except OSError:
            pass

    def _session(self, conn: Endpoint) -> None:
        cycle_us = None
        simulated = True
        own_hash = robot_hash(self.desc)
        while True:
            try:
                f = conn.recv()
            except FrameError as exc:
                self._fail(conn, exc.code, str(exc))
                return
            t = f.msg_type
            if t == MsgType.HELLO:
                if not f.payload or f.payload[0] != own_hash:
                    self._fail(conn, ErrorCode.HASH_MISMATCH, "robot description hash differs")
                    return
                conn.send(MsgType.HELLO, [own_hash])
            elif t == MsgType.CONFIG:
                try:
                    cycle_us, simulated = self._configure(f.payload)
                except (CDPRError, ValueError) as exc:
                    self._fail(conn, ErrorCode.BAD_CONFIG, str(exc))
                    return
                conn.send(MsgType.CONFIG, f.payload)
            elif t == MsgType.TIMESYNC_REQ:
                conn.send(MsgType.TIMESYNC_REP, [float(monotonic_us())], monotonic_us())
            elif t == MsgType.START:
                if cycle_us is None:
                    self._fail(conn, ErrorCode.UNEXPECTED, "START before CONFIG")
                    return
                conn.send(MsgType.START)
                if simulated:
                    self._run_simulated(conn, cycle_us)
                else:
                    self._run_realtime(conn, cycle_us)
                return
            elif t == MsgType.STOP:
                conn.send(MsgType.STOP)
                return
            else:
                self._fail(conn, ErrorCode.UNEXPECTED, f"unexpected {t:#x} during handshake")
                return

    def _configure(self, payload):
        if len(payload) != 4:
            raise ValueError("CONFIG payload must be [cycle_us, simulated, x, y]")
        cycle_us = int(payload[0])
        if cycle_us <= 0 or cycle_us % self.dt_us:
            raise ValueError(f"cycle {cycle_us} us must be a positive multiple of dt")
        self.state = plant_mod.init_state(self.desc, payload[2:4], self.cfg)
        self._command = plant_mod.SetpointInterpolator(self.state.axis, cycle_us // self.dt_us)
        return cycle_us, bool(payload[1])

    def _state_payload(self):
        pose, lengths, tensions, _ = plant_mod.measure(self.state)
        return [pose.x, pose.y, *lengths, *tensions]

    def _step(self):
        self.state = plant_mod.step(self.desc, self.cfg, self.state, self._command.next())
        self.steps_taken += 1

    def _latch(self, conn, f) -> bool:
        if len(f.payload) != self.desc.cable_count:
            self._fail(conn, ErrorCode.UNEXPECTED,
                       f"SETPOINT carries {len(f.payload)} lengths, expected {self.desc.cable_count}")
            return False
        with self._lock:
            self._command.latch(f.payload)
        return True

    def _run_simulated(self, conn: Endpoint, cycle_us: int) -> None:
        last_emitted = -1

        def now_us():
            return self.state.steps * self.dt_us

        def emit_if_boundary():
            nonlocal last_emitted
            t = now_us()
            if t % cycle_us == 0 and t > last_emitted:
                conn.send(MsgType.STATE, self._state_payload(), t)
                self.states_sent += 1
                last_emitted = t

        while True:
            try:
                f = conn.recv()
            except FrameError as exc:
                self._fail(conn, exc.code, str(exc))
                return
            if f.msg_type == MsgType.TIMESYNC_REQ:
                target = int(f.payload[0]) if f.payload else now_us()
                try:
                    emit_if_boundary()
                    while now_us() + self.dt_us <= target:
                        self._step()
                        emit_if_boundary()
                except CDPRError as exc:
                    self._fail(conn, ErrorCode.INTERNAL, str(exc))
                    return
                conn.send(MsgType.TIMESYNC_REP, [float(target)], now_us())
            elif f.msg_type == MsgType.SETPOINT:
                if not self._latch(conn, f):
                    return
            elif f.msg_type == MsgType.STOP:
                conn.send(MsgType.STOP, (), now_us())
                return
            else:
                self._fail(conn, ErrorCode.UNEXPECTED, f"unexpected {f.msg_type:#x}")
                return

    def _run_realtime(self, conn: Endpoint, cycle_us: int) -> None:
        stop = threading.Event()
        failure = []
        steps_per_cycle = cycle_us // self.dt_us

        def stepper():
            start = time.monotonic()
            conn_clock = monotonic_us
            try:
                while not stop.is_set():
                    due = int((time.monotonic() - start) / self.cfg.dt)
                    while self.state.steps < due:
                        with self._lock:
                            self._step()
                            payload = None
                            if self.state.steps % steps_per_cycle == 0:
                                payload = self._state_payload()
                        if payload is not None:
                            conn.send(MsgType.STATE, payload, conn_clock())
                            self.states_sent += 1
                    time.sleep(self.cfg.dt / 2)
            except (CDPRError, OSError) as exc:
                failure.append(exc)
                stop.set()
                self._fail(conn, ErrorCode.INTERNAL, str(exc))
                try:
                    conn.sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass

        conn.send(MsgType.STATE, self._state_payload(), monotonic_us())
        self.states_sent += 1
        worker = threading.Thread(target=stepper, name="plant-stepper", daemon=True)
        worker.start()
        try:
            while not stop.is_set():
                try:
                    f = conn.recv()
                except FrameError as exc:
                    self._fail(conn, exc.code, str(exc))
                    return
                except (EOFError, OSError):
                    break
                if f.msg_type == MsgType.SETPOINT:
                    if not self._latch(conn, f):
                        return
                elif f.msg_type == MsgType.TIMESYNC_REQ:
                    conn.send(MsgType.TIMESYNC_REP, [float(monotonic_us())], monotonic_us())
                elif f.msg_type == MsgType.STOP:
                    stop.set()
                    worker.join()
                    conn.send(MsgType.STOP, (), monotonic_us())
                    return
                else:
                    self._fail(conn, ErrorCode.UNEXPECTED, f"unexpected {f.msg_type:#x}")
                    return
        finally:
            stop.set()
            worker.join()
        if failure:
            raise ProtocolError(str(failure[0]), ErrorCode.INTERNAL)


def run_plant_server(desc, cfg, listen_endpoint, ready=None) -> None:
    """Serve one session on ``listen_endpoint``; ``ready(endpoint)`` is called once bound."""
    server = PlantServer(desc, cfg, listen_endpoint)
    if ready is not None:
        ready(server.endpoint)
    server.serve()
