import socket
import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdpr.analysis import delay_report
from cdpr.kinematics import inverse_kinematics
from cdpr.model import RobotDescription, robot_hash
from cdpr.netloop import (DelayLine, Gateway, PlantServer, delay_lines, read_log,
                          run_controller, run_experiment)
from cdpr.netloop.protocol import (Endpoint, ErrorCode, Frame, MsgType, connect,
                                   encode_frame, listen, read_raw)
from cdpr.plant import PlantConfig
from cdpr.trajectory import plan_line, plan_square, sample_count


def start_plant(desc, cfg=None):
    server = PlantServer(desc, cfg or PlantConfig())
    th = threading.Thread(target=server.serve, kwargs={"accept_timeout": 10}, daemon=True)
    th.start()
    return server, th


def handshake(conn, desc, cycle_us=10_000, start=(750, 750), simulated=True):
    h = robot_hash(desc)
    conn.send(MsgType.HELLO, [h])
    assert conn.recv().payload == (h,)
    cfg = [float(cycle_us), 1.0 if simulated else 0.0, *start]
    conn.send(MsgType.CONFIG, cfg)
    assert conn.recv().payload == tuple(cfg)


def test_handshake_then_stop(ref):
    server, th = start_plant(ref)
    conn = Endpoint(connect(server.endpoint))
    handshake(conn, ref)
    conn.send(MsgType.STOP)
    assert conn.recv().msg_type == MsgType.STOP
    th.join(5)
    conn.close()
    assert server.steps_taken == 0


def test_hash_mismatch(ref):
    server, th = start_plant(ref)
    conn = Endpoint(connect(server.endpoint))
    conn.send(MsgType.HELLO, [123.0])
    f = conn.recv()
    assert f.msg_type == MsgType.ERROR and f.payload[0] == ErrorCode.HASH_MISMATCH
    th.join(5)
    conn.close()


def test_holding_setpoint_settles(ref):
    server, th = start_plant(ref)
    conn = Endpoint(connect(server.endpoint))
    handshake(conn, ref)
    conn.send(MsgType.START)
    assert conn.recv().msg_type == MsgType.START
    hold = inverse_kinematics(ref, (750, 750))
    last = None
    for k in range(201):
        conn.send(MsgType.TIMESYNC_REQ, [k * 10_000.0])
        while True:
            f = conn.recv()
            if f.msg_type == MsgType.TIMESYNC_REP:
                break
            last = f
        conn.send(MsgType.SETPOINT, hold)
    conn.send(MsgType.STOP)
    while conn.recv().msg_type != MsgType.STOP:
        pass
    th.join(5)
    conn.close()
    assert last.t_send_us == 2_000_000
    assert np.hypot(last.payload[0] - 750, last.payload[1] - 750) < 1
    assert server.steps_taken == 2000


def test_malformed_frame_gets_error(ref):
    server, th = start_plant(ref)
    conn = Endpoint(connect(server.endpoint))
    handshake(conn, ref)
    conn.send(MsgType.START)
    conn.recv()
    conn.send_raw(b"XXXX" + encode_frame(Frame(MsgType.STOP))[4:])
    f = conn.recv()
    assert f.msg_type == MsgType.ERROR and f.payload[0] == ErrorCode.BAD_MAGIC
    with pytest.raises(EOFError):
        conn.recv()
    th.join(5)
    conn.close()


def test_delay_statistics():
    line = DelayLine(120, 10, np.random.default_rng(42))
    delays = np.array([line.release_time(k * 1_000_000) - k * 1_000_000 for k in range(1000)])
    assert delays.min() >= 110_000 and delays.max() <= 130_000
    assert abs(delays.mean() - 120_000) < 2_000


def test_delay_lines_are_seeded():
    a, _ = delay_lines(20, 5, 7)
    b, _ = delay_lines(20, 5, 7)
    c, _ = delay_lines(20, 5, 8)
    ra = [a.release_time(k * 10_000) for k in range(50)]
    assert ra == [b.release_time(k * 10_000) for k in range(50)]
    assert ra != [c.release_time(k * 10_000) for k in range(50)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(0, 20_000), min_size=1, max_size=200))
def test_release_order_preserved(seed, gaps):
    line = DelayLine(120, 10, np.random.default_rng(seed))
    t, releases = 0, []
    for g in gaps:
        t += g
        releases.append(line.release_time(t))
    assert releases == sorted(releases)


def _echo_sink(srv, received):
    sock, _ = srv.accept()
    try:
        while True:
            received.append((time.monotonic(), read_raw(sock)))
    except (EOFError, OSError):
        pass
    finally:
        sock.close()


@pytest.mark.parametrize("base,jitter,seed", [(0, 0, 0), (5, 5, 1), (5, 5, 2), (2, 2, 3)])
def test_realtime_gateway_order_and_bytes(base, jitter, seed):
    srv = listen("127.0.0.1:0")
    upstream = "%s:%d" % srv.getsockname()
    received = []
    sink = threading.Thread(target=_echo_sink, args=(srv, received), daemon=True)
    sink.start()
    gw = Gateway("127.0.0.1:0", upstream, base, jitter, seed, simulated=False)
    gth = threading.Thread(target=gw.serve, kwargs={"accept_timeout": 10}, daemon=True)
    gth.start()
    client = Endpoint(connect(gw.endpoint))
    sent = []
    for k in range(100):
        raw = encode_frame(Frame(MsgType.SETPOINT, k, 0, (float(k), 1.5)))
        sent.append((time.monotonic(), raw))
        client.send_raw(raw)
        time.sleep(0.0005)
    client.sock.shutdown(socket.SHUT_WR)
    sink.join(10)
    client.close()
    gth.join(10)
    srv.close()
    assert [r for _, r in received] == [r for _, r in sent]
    if base == 0 and jitter == 0:
        added = np.median([rt - st_ for (rt, _), (st_, _) in zip(received, sent)])
        assert added < 0.001


def test_unreachable_endpoint(tmp_path, ref):
    srv = listen("127.0.0.1:0")
    endpoint = "%s:%d" % srv.getsockname()
    srv.close()
    path = tmp_path / "log.csv"
    with pytest.raises(ConnectionError):
        run_controller(ref, plan_line((650, 750), (700, 750), 100), 0.01, endpoint, path)
    assert not path.exists()


def test_direct_ideal_lag_within_one_cycle(ref):
    plan = plan_square((750, 850), 200, 100)
    log = run_experiment(ref, plan, plant_cfg=PlantConfig(mode="ideal"))
    rep = delay_report(log)
    assert all(0 <= d <= 10.0 + 1e-9 for d in rep.delays_ms)
    a = log.arrays()
    assert (a["state_age_us"][1:] == 0).all()


def test_log_deterministic_and_round_trips(tmp_path, ref):
    plan = plan_line((650, 750), (850, 750), 100)
    a = run_experiment(ref, plan, gateway=(20, 5), seed=3, log_path=tmp_path / "a.csv")
    b = run_experiment(ref, plan, gateway=(20, 5), seed=3)
    assert a.to_csv() == b.to_csv()
    back = read_log(tmp_path / "a.csv")
    assert back.to_csv() == a.to_csv()
    assert len(a) == sample_count(plan, 0.01) and a.truncated is None


def test_gateway_preserves_state_order(ref):
    plan = plan_line((650, 750), (850, 750), 100)
    for seed in range(4):
        log = run_experiment(ref, plan, gateway=(30, 10), seed=seed).arrays()
        have = log["state_age_us"] >= 0
        origin = (log["t_us"] - log["state_age_us"])[have]
        assert np.all(np.diff(origin) >= 0)


def _dying_plant(srv, cycles):
    sock, _ = srv.accept()
    conn = Endpoint(sock)
    try:
        for _ in range(3):
            f = conn.recv()
            conn.send(f.msg_type, f.payload)
        for _ in range(cycles):
            f = conn.recv()
            if f.msg_type == MsgType.TIMESYNC_REQ:
                conn.send(MsgType.STATE, [650, 750, 1, 1, 0, 0], int(f.payload[0]))
                conn.send(MsgType.TIMESYNC_REP, f.payload)
    finally:
        conn.close()


def test_truncated_log_on_connection_loss(tmp_path, ref):
    srv = listen("127.0.0.1:0")
    endpoint = "%s:%d" % srv.getsockname()
    th = threading.Thread(target=_dying_plant, args=(srv, 40), daemon=True)
    th.start()
    path = tmp_path / "cut.csv"
    log = run_controller(ref, plan_line((650, 750), (850, 750), 100), 0.01, endpoint, path)
    th.join(5)
    srv.close()
    assert log.truncated and 0 < len(log) < 100
    assert "# truncated:" in path.read_text()
    assert read_log(path).truncated


def test_three_cable_loop():
    desc = RobotDescription(((0, 1500), (1500, 1500), (750, 0)), 120, 120, 1, 0, 20)
    log = run_experiment(desc, plan_line((700, 750), (800, 750), 100))
    assert log.arrays()["meas_l"].shape[1] == 3


def test_realtime_direct(ref):
    plan = plan_line((650, 750), (700, 750), 100)
    log = run_experiment(ref, plan, simulated=False)
    a = log.arrays()
    assert len(log) == sample_count(plan, 0.01) and log.truncated is None
    assert np.isfinite(a["meas"][-1]).all()
    assert np.hypot(*(a["meas"][-1] - (700, 750))) < 5


def test_realtime_via_gateway(ref):
    plan = plan_line((650, 750), (700, 750), 100)
    log = run_experiment(ref, plan, gateway=(20, 2), seed=1, simulated=False)
    ages = log.arrays()["state_age_us"]
    valid = ages[ages >= 0]
    assert len(valid) > 10
    assert np.median(valid) > 15_000
