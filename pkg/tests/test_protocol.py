"""Test the wire codec, the session state machine and the overhead model."""

import sys
import os
import json
import socket
import threading

import numpy as np
import pytest

# Add src to path for testing
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from core.model import Action, FrameResult, Observation, Stage  # noqa: E402
from protocol.protocol import (  # noqa: E402
    HEADER,
    Act,
    Bye,
    Connection,
    DecodeError,
    DeviceChannel,
    EncodingError,
    FrameDone,
    Hello,
    LengthMismatchError,
    MissingFieldError,
    Obs,
    ProtocolError,
    Session,
    UnknownTypeError,
    decode,
    encode,
    frame_overhead,
    is_legal,
    serve_session,
)


def _frame(doc):
    payload = json.dumps(doc).encode("utf-8")
    return HEADER.pack(len(payload)) + payload


def _random_done(rng):
    return FrameDone(*(float(x) for x in rng.uniform(0, 500, size=3)),
                     int(rng.integers(0, 2000)), *(float(x) for x in rng.uniform(20, 95, 2)))


def _random_obs(rng, stage=None):
    stage = stage or (Stage.FRAME_START if rng.random() < 0.5 else Stage.AFTER_RPN)
    proposals = int(rng.integers(0, 2000)) if stage is Stage.AFTER_RPN else None
    done = _random_done(rng) if stage is Stage.FRAME_START and rng.random() < 0.5 else None
    return Obs(stage.value, float(rng.uniform(20, 95)), float(rng.uniform(20, 95)),
               int(rng.integers(0, 20)), int(rng.integers(0, 20)),
               float(rng.normal(0, 200)), proposals, done)


def _random_message(rng):
    kind = int(rng.integers(5))
    if kind == 0:
        budget = float(rng.uniform(50, 900)) if rng.random() < 0.5 else None
        return Hello(f"device-{int(rng.integers(100))}", budget)
    if kind == 1:
        return _random_obs(rng)
    if kind == 2:
        return Act(int(rng.integers(0, 20)), int(rng.integers(0, 20)))
    if kind == 3:
        return _random_done(rng)
    return Bye()


def _legal_trace(rng, frames):
    trace = [Hello("jetson")]
    pending = None
    for _ in range(frames):
        start = _random_obs(rng, Stage.FRAME_START)
        start = Obs(**{**start.__dict__, "frame_done": pending})
        trace += [start, Act(1, 1), _random_obs(rng, Stage.AFTER_RPN), Act(2, 2)]
        pending = _random_done(rng)
        if rng.random() < 0.3:
            trace.append(pending)
            pending = None
    if pending is not None:
        trace.append(pending)
    trace.append(Bye())
    return trace


# -------------------------------
# Codec
# -------------------------------

def test_bye_bytes():
    data = encode(Bye())
    assert data[4:] == b'{"type":"bye","body":{}}'
    assert data[:4] == b"\x00\x00\x00\x18"
    assert len(data) == 28
    print("[OK] Bye frame bytes")


def test_roundtrip_generated_messages():
    rng = np.random.default_rng(0)
    for _ in range(10000):
        msg = _random_message(rng)
        assert decode(encode(msg)) == msg
    print("[OK] 10000 generated messages survive the codec")


def test_decode_errors():
    good = encode(Act(1, 2))
    with pytest.raises(LengthMismatchError):
        decode(good[:-1])
    with pytest.raises(LengthMismatchError):
        decode(good[:3])
    with pytest.raises(EncodingError):
        decode(HEADER.pack(2) + b"\xff\xfe")
    with pytest.raises(UnknownTypeError):
        decode(_frame({"type": "reset", "body": {}}))
    with pytest.raises(MissingFieldError):
        decode(_frame({"type": "act", "body": {"cpu_level": 1}}))
    with pytest.raises(MissingFieldError):
        decode(_frame({"body": {}}))
    with pytest.raises(DecodeError):
        decode(_frame({"type": "act", "body": {"cpu_level": "1", "gpu_level": 0}}))
    with pytest.raises(DecodeError):
        decode(_frame({"type": "act", "body": {"cpu_level": True, "gpu_level": 0}}))
    # proposal count on a frame-start observation
    with pytest.raises(DecodeError):
        decode(_frame({"type": "obs", "body": {
            "stage": "frame_start", "cpu_temp": 40, "gpu_temp": 40,
            "cpu_level": 0, "gpu_level": 0, "slack_ms": 0, "proposals": 3}}))
    # integer too large for a float field
    with pytest.raises(DecodeError):
        decode(_frame({"type": "hello", "body": {
            "device_profile": "jetson-fasterrcnn-kitti", "budget_ms": 10 ** 400}}))
    # negative levels are caught at decode time, not at action()
    with pytest.raises(DecodeError):
        decode(_frame({"type": "act", "body": {"cpu_level": -1, "gpu_level": 0}}))
    with pytest.raises(DecodeError):
        decode(_frame({"type": "frame_done", "body": {
            "stage1_ms": 1, "stage2_ms": 1, "total_ms": 2, "proposals": -4,
            "cpu_temp": 40, "gpu_temp": 40}}))
    with pytest.raises(TypeError):
        encode(Action(0, 0))
    print("[OK] Typed decode errors")


def test_obs_converts_to_observation():
    obs = Observation(Stage.AFTER_RPN, 55.5, 61.0, 3, 1, -12.5, 240)
    wire = Obs.from_observation(obs)
    assert decode(encode(wire)).observation() == obs
    r = FrameResult(280.0, 90.0, 372.5, 240, 56.0, 62.0)
    assert FrameDone.from_result(r).result() == r
    print("[OK] Observation and frame result conversion")


# -------------------------------
# Session State Machine
# -------------------------------

def test_legal_traces_accepted():
    rng = np.random.default_rng(1)
    for frames in (0, 1, 2, 5):
        assert is_legal(_legal_trace(rng, frames))
    session = Session()
    for msg in _legal_trace(rng, 3):
        session.accept(msg)
    assert session.frames == 3
    assert session.critical_messages == 12
    print("[OK] Legal traces accepted")


def test_transpositions_rejected():
    rng = np.random.default_rng(2)
    for _ in range(20):
        trace = _legal_trace(rng, int(rng.integers(1, 4)))
        for i in range(len(trace) - 1):
            swapped = list(trace)
            swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
            assert not is_legal(swapped), (i, swapped[i], swapped[i + 1])
    print("[OK] Adjacent transpositions rejected")


def test_illegal_orders():
    start = Obs("frame_start", 40.0, 40.0, 0, 0, 0.0)
    assert not is_legal([Hello("d"), Act(0, 0), Bye()])
    assert not is_legal([Hello("d"), start, Act(0, 0), Bye()])
    assert not is_legal([start, Act(0, 0)])
    assert not is_legal([Hello("d"), Hello("d"), Bye()])
    assert not is_legal([Hello("d")])
    done = FrameDone(1.0, 1.0, 2.0, 0, 40.0, 40.0)
    piggy = Obs("frame_start", 40.0, 40.0, 0, 0, 0.0, frame_done=done)
    assert not is_legal([Hello("d"), piggy, Act(0, 0)])
    with pytest.raises(ProtocolError):
        Session().accept(Act(0, 0))
    print("[OK] Out-of-order messages rejected")


# -------------------------------
# Socket Exchange
# -------------------------------

class _Recorder:
    def __init__(self):
        self.greeting = None
        self.observations = []
        self.results = []

    def hello(self, msg):
        self.greeting = msg

    def decide(self, obs):
        self.observations.append(obs)
        return Action(obs.cpu_level, 1 if obs.stage is Stage.FRAME_START else 2)

    def frame_done(self, result):
        self.results.append(result)


def test_socketpair_session():
    agent_sock, device_sock = socket.socketpair()
    handler = _Recorder()
    outcome = {}

    def agent_side():
        conn = Connection(agent_sock, timeout=5.0)
        outcome["frames"] = serve_session(conn, handler)
        outcome["critical"] = conn.session.critical_messages
        conn.close()

    thread = threading.Thread(target=agent_side)
    thread.start()

    conn = Connection(device_sock, timeout=5.0)
    channel = DeviceChannel(conn)
    channel.hello("jetson", 400.0)
    results = []
    for k in range(3):
        a = channel.decide(Observation(Stage.FRAME_START, 40.0 + k, 41.0, 2, 0, 10.0))
        b = channel.decide(Observation(Stage.AFTER_RPN, 42.0, 43.0, a.cpu_level, a.gpu_level,
                                       5.0, 100 + k))
        assert a == Action(2, 1) and b == Action(2, 2)
        result = FrameResult(300.0, 80.0 + k, 380.0 + k, 100 + k, 44.0, 45.0)
        channel.frame_done(result)
        results.append(result)
    channel.close()
    thread.join(timeout=5.0)
    conn.close()

    assert outcome == {"frames": 3, "critical": 12}
    assert conn.sent == 1 + 6 + 1 + 1 and conn.received == 6
    assert handler.results == results
    assert len(handler.observations) == 6
    assert handler.greeting == Hello("jetson", 400.0)
    print("[OK] Socket pair session")


def test_truncated_stream():
    a, b = socket.socketpair()
    conn = Connection(b, timeout=2.0)
    a.sendall(encode(Hello("x"))[:-3])
    a.close()
    with pytest.raises(LengthMismatchError):
        conn.recv()
    conn.close()
    print("[OK] Truncated stream flagged")


# -------------------------------
# Overhead
# -------------------------------

def test_frame_overhead():
    two = frame_overhead(2)
    assert two.pre_ms == pytest.approx(4.26)
    assert two.mid_ms == pytest.approx(4.26)
    assert two.total_ms == pytest.approx(8.52)
    assert frame_overhead(1).total_ms == pytest.approx(4.26)
    assert frame_overhead(0).total_ms == 0.0
    assert frame_overhead(2, message_ms=0.0, decision_ms=0.0).total_ms == 0.0
    with pytest.raises(ValueError):
        frame_overhead(3)
    print("[OK] 2 x 0.42 + 4 x 1.92 = 8.52 ms per frame")


if __name__ == "__main__":
    test_bye_bytes()
    test_roundtrip_generated_messages()
    test_decode_errors()
    test_obs_converts_to_observation()
    test_legal_traces_accepted()
    test_transpositions_rejected()
    test_illegal_orders()
    test_socketpair_session()
    test_truncated_stream()
    test_frame_overhead()
