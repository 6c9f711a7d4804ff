"""Binary frame codec shared by the controller, gateway and plant server.

Layout (little-endian)::

    magic      4s   b"CDPR"
    version    u8   1
    msg_type   u8
    flags      u16  0
    seq        u32
    t_send_us  u64  sender clock, microseconds
    payload_len u16 bytes, multiple of 8
    payload    payload_len bytes of float64
"""
from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass, field
from enum import IntEnum

from ..errors import CDPRError

MAGIC = b"CDPR"
VERSION = 1
HEADER = struct.Struct("<4sBBHIQH")
HEADER_SIZE = HEADER.size
MAX_DOUBLES = 0xFFFF // 8


class MsgType(IntEnum):
    HELLO = 0x01
    CONFIG = 0x02
    START = 0x03
    SETPOINT = 0x04
    STATE = 0x05
    STOP = 0x06
    TIMESYNC_REQ = 0x07
    TIMESYNC_REP = 0x08
    ERROR = 0x7F


class ErrorCode(IntEnum):
    BAD_MAGIC = 1
    BAD_VERSION = 2
    TRUNCATED = 3
    UNEXPECTED = 4
    HASH_MISMATCH = 5
    BAD_CONFIG = 6
    INTERNAL = 7


class FrameError(CDPRError):
    code = ErrorCode.INTERNAL


class BadMagic(FrameError):
    code = ErrorCode.BAD_MAGIC


class UnsupportedVersion(FrameError):
    code = ErrorCode.BAD_VERSION


class TruncatedFrame(FrameError):
    code = ErrorCode.TRUNCATED


class ProtocolError(CDPRError):
    """Peer sent something out of sequence or reported an error."""

    def __init__(self, message, code=ErrorCode.UNEXPECTED):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Frame:
    msg_type: int
    seq: int = 0
    t_send_us: int = 0
    payload: tuple[float, ...] = field(default_factory=tuple)
    version: int = VERSION
    flags: int = 0

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(float(v) for v in self.payload))


def encode_frame(frame: Frame) -> bytes:
    n = len(frame.payload)
    if n > MAX_DOUBLES:
        raise FrameError(f"payload of {n} doubles does not fit a u16 length")
    head = HEADER.pack(MAGIC, frame.version, int(frame.msg_type), frame.flags,
                       frame.seq, frame.t_send_us, 8 * n)
    return head + struct.pack(f"<{n}d", *frame.payload)


def _check_header(head: bytes):
    magic, version, msg_type, flags, seq, t_send, plen = HEADER.unpack(head)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported protocol version {version}")
    if plen % 8:
        raise TruncatedFrame(f"payload length {plen} is not a multiple of 8")
    return version, msg_type, flags, seq, t_send, plen


def decode_frame(buf: bytes) -> Frame:
    """Decode one complete frame; trailing bytes are an error."""
    if len(buf) < HEADER_SIZE:
        raise TruncatedFrame(f"{len(buf)} bytes is shorter than the {HEADER_SIZE}-byte header")
    version, msg_type, flags, seq, t_send, plen = _check_header(buf[:HEADER_SIZE])
    if len(buf) != HEADER_SIZE + plen:
        raise TruncatedFrame(f"expected {HEADER_SIZE + plen} bytes, got {len(buf)}")
    payload = struct.unpack(f"<{plen // 8}d", buf[HEADER_SIZE:])
    return Frame(msg_type, seq, t_send, payload, version, flags)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks, got = [], 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0:
                raise EOFError("peer closed the connection")
            raise TruncatedFrame(f"connection closed after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_raw(sock: socket.socket) -> bytes:
    """Read the bytes of one frame from a stream socket (validating the header)."""
    head = _recv_exact(sock, HEADER_SIZE)
    *_, plen = _check_header(head)
    try:
        body = _recv_exact(sock, plen) if plen else b""
    except EOFError:
        raise TruncatedFrame("connection closed inside a frame") from None
    return head + body


def read_frame(sock: socket.socket) -> Frame:
    return decode_frame(read_raw(sock))


class Endpoint:
    """One side of a framed connection that numbers the frames it originates."""

    def __init__(self, sock: socket.socket, clock=None):
        self.sock = sock
        self.seq = 0
        self.clock = clock
        self._lock = threading.Lock()

    def send(self, msg_type, payload=(), t_send_us=None) -> Frame:
        if t_send_us is None:
            t_send_us = self.clock() if self.clock else 0
        with self._lock:
            self.seq += 1
            frame = Frame(msg_type, self.seq, int(t_send_us), tuple(payload))
            self.sock.sendall(encode_frame(frame))
        return frame

    def send_raw(self, data: bytes) -> None:
        with self._lock:
            self.sock.sendall(data)

    def recv(self) -> Frame:
        return read_frame(self.sock)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {text!r}")
    return host, int(port)


def listen(endpoint) -> socket.socket:
    host, port = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    return srv


def tune(sock: socket.socket) -> socket.socket:
    # small frames in lockstep; Nagle + delayed ACK would add ~40 ms per hop
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return sock


def connect(endpoint, timeout=5.0) -> socket.socket:
    host, port = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return tune(sock)
