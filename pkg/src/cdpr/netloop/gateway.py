"""Frame-forwarding proxy that injects seeded latency and jitter.

Each direction draws its delays from its own random stream, so the delay
sequence depends only on the seed and on the order of frames in that
direction. Release times are monotonized: a frame is never released before its
predecessor in the same direction.

In simulated-time mode the gateway sits on the virtual clock: the controller's
TIMESYNC requests advance it, and the gateway advances the plant in turn,
delivering each delayed frame at its exact (virtual) release time. TIMESYNC
frames are therefore hop-local in that mode; all other frames are forwarded
byte-for-byte.
"""
from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from collections import deque

import numpy as np

from .protocol import (Endpoint, FrameError, MsgType, connect, decode_frame, listen,
                       read_raw, tune)

log = logging.getLogger(__name__)


class DelayLine:
    """Seeded per-direction delay model, times in microseconds."""

    def __init__(self, base_ms: float, jitter_ms: float, rng: np.random.Generator):
        if base_ms < 0 or jitter_ms < 0:
            raise ValueError("delays must be >= 0")
        self.base_us = base_ms * 1000.0
        self.jitter_us = jitter_ms * 1000.0
        self.rng = rng
        self.last_release = None

    def draw(self) -> float:
        if self.jitter_us == 0:
            return self.base_us
        return max(0.0, self.base_us + self.rng.uniform(-self.jitter_us, self.jitter_us))

    def release_time(self, t_in_us: int) -> int:
        r = int(round(t_in_us + self.draw()))
        if self.last_release is not None and r < self.last_release:
            r = self.last_release
        self.last_release = r
        return r


def delay_lines(base_ms, jitter_ms, seed):
    """(downstream, upstream) delay lines seeded independently from one seed."""
    down, up = np.random.SeedSequence(seed).spawn(2)
    return (DelayLine(base_ms, jitter_ms, np.random.default_rng(down)),
            DelayLine(base_ms, jitter_ms, np.random.default_rng(up)))


class Gateway:
    def __init__(self, listen_endpoint, upstream_endpoint, base_delay_ms=0.0,
                 jitter_ms=0.0, seed=0, simulated=True):
        self.upstream_endpoint = upstream_endpoint
        self.base_delay_ms = base_delay_ms
        self.jitter_ms = jitter_ms
        self.seed = seed
        self.simulated = simulated
        self.down_line, self.up_line = delay_lines(base_delay_ms, jitter_ms, seed)
        self._srv = listen(listen_endpoint)
        self.address = self._srv.getsockname()
        self.forwarded = {"down": 0, "up": 0}

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
        client = Endpoint(tune(sock))
        try:
            upstream = Endpoint(connect(self.upstream_endpoint))
        except OSError as exc:
            client.close()
            raise ConnectionError(f"cannot reach upstream {self.upstream_endpoint}: {exc}") from exc
        log.info("gateway %s -> %s (%.1f +/- %.1f ms)", peer, self.upstream_endpoint,
                 self.base_delay_ms, self.jitter_ms)
        try:
            if self.simulated:
                self._serve_simulated(client, upstream)
            else:
                self._serve_realtime(client, upstream)
        except (EOFError, ConnectionError, FrameError, OSError) as exc:
            log.info("gateway session ended: %s", exc)
        finally:
            client.close()
            upstream.close()

    def close(self):
        self._srv.close()

    # simulated time

    def _serve_simulated(self, client: Endpoint, plant: Endpoint) -> None:
        while True:
            raw = read_raw(client.sock)
            f = decode_frame(raw)
            plant.send_raw(raw)
            reply = read_raw(plant.sock)
            client.send_raw(reply)
            r = decode_frame(reply)
            if r.msg_type in (MsgType.ERROR, MsgType.STOP):
                return
            if f.msg_type == MsgType.START and r.msg_type == MsgType.START:
                break

        down, up = deque(), deque()

        def advance_plant(t_us) -> bool:
            plant.send(MsgType.TIMESYNC_REQ, [float(t_us)], t_us)
            while True:
                raw = read_raw(plant.sock)
                g = decode_frame(raw)
                if g.msg_type == MsgType.TIMESYNC_REP:
                    return True
                if g.msg_type == MsgType.ERROR:
                    client.send_raw(raw)
                    return False
                up.append((self.up_line.release_time(g.t_send_us), raw))

        def deliver_due(t_us) -> bool:
            while down and down[0][0] <= t_us:
                release, raw = down.popleft()
                if not advance_plant(release):
                    return False
                plant.send_raw(raw)
                self.forwarded["down"] += 1
            return True

        while True:
            raw = read_raw(client.sock)
            f = decode_frame(raw)
            if f.msg_type == MsgType.TIMESYNC_REQ:
                t_us = int(f.payload[0])
                if not (deliver_due(t_us) and advance_plant(t_us)):
                    return
                while up and up[0][0] <= t_us:
                    client.send_raw(up.popleft()[1])
                    self.forwarded["up"] += 1
                client.send(MsgType.TIMESYNC_REP, [float(t_us)], t_us)
            elif f.msg_type == MsgType.STOP:
                down.append((self.down_line.release_time(f.t_send_us), raw))
                if not deliver_due(down[-1][0]):
                    return
                # drain the plant until its STOP acknowledgement, then flush
                while True:
                    try:
                        raw = read_raw(plant.sock)
                    except EOFError:
                        break
                    up.append((None, raw))
                    if decode_frame(raw).msg_type in (MsgType.STOP, MsgType.ERROR):
                        break
                for _, raw in up:
                    client.send_raw(raw)
                    self.forwarded["up"] += 1
                return
            else:
                down.append((self.down_line.release_time(f.t_send_us), raw))

    # wall-clock time

    def _serve_realtime(self, client: Endpoint, plant: Endpoint) -> None:
        threads = []
        for name, src, dst, line in (("down", client, plant, self.down_line),
                                     ("up", plant, client, self.up_line)):
            q: queue.Queue = queue.Queue()
            threads.append(threading.Thread(target=self._pump, args=(src, q, line),
                                            name=f"gw-read-{name}", daemon=True))
            threads.append(threading.Thread(target=self._release, args=(dst, q, name),
                                            name=f"gw-send-{name}", daemon=True))
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    @staticmethod
    def _pump(src: Endpoint, q: queue.Queue, line: DelayLine) -> None:
        try:
            while True:
                raw = read_raw(src.sock)
                q.put((line.release_time(time.monotonic_ns() // 1000), raw))
        except (EOFError, FrameError, OSError):
            q.put(None)

    def _release(self, dst: Endpoint, q: queue.Queue, name: str) -> None:
        try:
            while True:
                item = q.get()
                if item is None:
                    break
                release, raw = item
                wait = (release - time.monotonic_ns() // 1000) / 1e6
                if wait > 0:
                    time.sleep(wait)
                dst.send_raw(raw)
                self.forwarded[name] += 1
        except OSError:
            pass
        finally:
            try:
                dst.sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass


def run_gateway(listen_endpoint, upstream_endpoint, base_delay, jitter, seed,
                simulated=True, ready=None) -> None:
    """Proxy one session from ``listen_endpoint`` to ``upstream_endpoint``.

    ``base_delay`` and ``jitter`` are in ms.
    """
    gw = Gateway(listen_endpoint, upstream_endpoint, base_delay, jitter, seed, simulated)
    if ready is not None:
        ready(gw.endpoint)
    gw.serve()
