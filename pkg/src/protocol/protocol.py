"""
Wire protocol between a device and the agent.

Frame: 4-byte big-endian payload length, then a UTF-8 JSON object
{"type": <tag>, "body": {...}}.

Per frame the device sends Obs(frame_start), the agent answers Act, the
device sends Obs(after_rpn), the agent answers Act. The frame outcome
(FrameDone) rides on the next frame's first Obs, or is sent on its own
before Bye.
"""

import json
import math
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from core.model import Action, FrameResult, Observation, Stage
from device.simulator import Overhead


DEFAULT_PORT = 7431
HEADER = struct.Struct(">I")
MAX_PAYLOAD = 1 << 20


# -------------------------------
# Errors
# -------------------------------

class DecodeError(ValueError):
    """A frame could not be turned into a message."""


class LengthMismatchError(DecodeError):
    pass


class EncodingError(DecodeError):
    pass


class UnknownTypeError(DecodeError):
    pass


class MissingFieldError(DecodeError):
    pass


class ProtocolError(RuntimeError):
    """A well-formed message arrived out of order."""


class ConnectionClosed(EOFError):
    """The peer closed the stream at a frame boundary."""


# -------------------------------
# Messages
# -------------------------------

@dataclass(frozen=True)
class Hello:
    device_profile: str
    budget_ms: Optional[float] = None


@dataclass(frozen=True)
class FrameDone:
    stage1_ms: float
    stage2_ms: float
    total_ms: float
    proposals: int
    cpu_temp: float
    gpu_temp: float

    @classmethod
    def from_result(cls, r):
        return cls(r.stage1_ms, r.stage2_ms, r.total_ms, r.proposals, r.cpu_temp, r.gpu_temp)

    def result(self):
        return FrameResult(self.stage1_ms, self.stage2_ms, self.total_ms,
                           self.proposals, self.cpu_temp, self.gpu_temp)


@dataclass(frozen=True)
class Obs:
    stage: str
    cpu_temp: float
    gpu_temp: float
    cpu_level: int
    gpu_level: int
    slack_ms: float
    proposals: Optional[int] = None
    frame_done: Optional[FrameDone] = None

    @classmethod
    def from_observation(cls, o, frame_done=None):
        return cls(o.stage.value, o.cpu_temp, o.gpu_temp, o.cpu_level, o.gpu_level,
                   o.slack_ms, o.proposals, frame_done)

    def observation(self):
        return Observation(Stage(self.stage), self.cpu_temp, self.gpu_temp,
                           self.cpu_level, self.gpu_level, self.slack_ms, self.proposals)


@dataclass(frozen=True)
class Act:
    cpu_level: int
    gpu_level: int

    @classmethod
    def from_action(cls, a):
        return cls(a.cpu_level, a.gpu_level)

    def action(self):
        return Action(self.cpu_level, self.gpu_level)


@dataclass(frozen=True)
class Bye:
    pass


TAGS = {Hello: "hello", Obs: "obs", Act: "act", FrameDone: "frame_done", Bye: "bye"}
TYPES = {tag: cls for cls, tag in TAGS.items()}

_FRAME_DONE_FIELDS = {
    "stage1_ms": float, "stage2_ms": float, "total_ms": float,
    "proposals": int, "cpu_temp": float, "gpu_temp": float,
}
_FIELDS = {
    Hello: ({"device_profile": str}, {"budget_ms": float}),
    Obs: (
        {"stage": str, "cpu_temp": float, "gpu_temp": float,
         "cpu_level": int, "gpu_level": int, "slack_ms": float},
        {"proposals": int, "frame_done": FrameDone},
    ),
    Act: ({"cpu_level": int, "gpu_level": int}, {}),
    FrameDone: (_FRAME_DONE_FIELDS, {}),
    Bye: ({}, {}),
}


def _check_frame_done(msg):
    if msg.proposals < 0:
        raise ValueError("proposal count must be non-negative")
    if min(msg.stage1_ms, msg.stage2_ms, msg.total_ms) < 0:
        raise ValueError("frame times must be non-negative")


# Domain validation run after field coercion; failures become DecodeError.
_CHECKS = {
    Obs: Obs.observation,
    Act: Act.action,
    FrameDone: _check_frame_done,
}


# -------------------------------
# Codec
# -------------------------------

def _body(msg):
    body = {}
    required, optional = _FIELDS[type(msg)]
    for name in list(required) + list(optional):
        value = getattr(msg, name)
        if value is None and name in optional:
            continue
        body[name] = _body(value) if isinstance(value, FrameDone) else value
    return body


def encode(msg):
    if type(msg) not in TAGS:
        raise TypeError(f"not a protocol message: {msg!r}")
    payload = json.dumps(
        {"type": TAGS[type(msg)], "body": _body(msg)},
        separators=(",", ":"),
        allow_nan=False,
    ).encode("utf-8")
    return HEADER.pack(len(payload)) + payload


def _coerce(name, value, kind):
    if kind is FrameDone:
        return _build(FrameDone, value)
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DecodeError(f"field {name} must be a finite number")
        try:
            number = float(value)
        except OverflowError:
            raise DecodeError(f"field {name} is out of range") from None
        if not math.isfinite(number):
            raise DecodeError(f"field {name} must be a finite number")
        return number
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise DecodeError(f"field {name} must be an integer")
        return value
    if not isinstance(value, kind):
        raise DecodeError(f"field {name} must be {kind.__name__}")
    return value


def _build(cls, body):
    if not isinstance(body, dict):
        raise DecodeError(f"{TAGS[cls]} body must be an object")
    required, optional = _FIELDS[cls]
    values = {}
    for name, kind in required.items():
        if name not in body:
            raise MissingFieldError(f"{TAGS[cls]} missing field '{name}'")
        values[name] = _coerce(name, body[name], kind)
    for name, kind in optional.items():
        if body.get(name) is not None:
            values[name] = _coerce(name, body[name], kind)
    msg = cls(**values)
    if cls in _CHECKS:
        try:
            _CHECKS[cls](msg)
        except ValueError as e:
            raise DecodeError(f"invalid {TAGS[cls]}: {e}") from None
    return msg


def decode_payload(payload):
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(f"payload is not UTF-8: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DecodeError(f"payload is not JSON: {e}") from None
    if not isinstance(doc, dict) or "type" not in doc:
        raise MissingFieldError("frame missing 'type'")
    if "body" not in doc:
        raise MissingFieldError("frame missing 'body'")
    cls = TYPES.get(doc["type"])
    if cls is None:
        raise UnknownTypeError(f"unknown message type {doc['type']!r}")
    return _build(cls, doc["body"])


def decode(data):
    if len(data) < HEADER.size:
        raise LengthMismatchError(f"frame shorter than its {HEADER.size}-byte header")
    (length,) = HEADER.unpack_from(data)
    if len(data) - HEADER.size != length:
        raise LengthMismatchError(
            f"header announces {length} bytes, frame carries {len(data) - HEADER.size}"
        )
    return decode_payload(bytes(data[HEADER.size:]))


# -------------------------------
# Session State Machine
# -------------------------------

class SessionState(Enum):
    START = "start"
    READY = "ready"
    AWAIT_ACT_START = "await_act_start"
    AWAIT_OBS_RPN = "await_obs_rpn"
    AWAIT_ACT_RPN = "await_act_rpn"
    FRAME_END = "frame_end"
    CLOSED = "closed"


class Session:
    """
    Accepts exactly the traces
    Hello (Obs Act Obs Act [FrameDone])* Bye.
    """

    def __init__(self):
        self.state = SessionState.START
        self.frames = 0
        self.critical_messages = 0

    def accept(self, msg):
        s = self.state
        nxt = None
        if isinstance(msg, Hello) and s is SessionState.START:
            nxt = SessionState.READY
        elif isinstance(msg, Obs):
            stage = msg.stage
            if stage == Stage.FRAME_START.value and (
                    s is SessionState.FRAME_END
                    or (s is SessionState.READY and msg.frame_done is None)):
                nxt = SessionState.AWAIT_ACT_START
            elif (stage == Stage.AFTER_RPN.value and s is SessionState.AWAIT_OBS_RPN
                  and msg.frame_done is None):
                nxt = SessionState.AWAIT_ACT_RPN
        elif isinstance(msg, Act):
            if s is SessionState.AWAIT_ACT_START:
                nxt = SessionState.AWAIT_OBS_RPN
            elif s is SessionState.AWAIT_ACT_RPN:
                nxt = SessionState.FRAME_END
                self.frames += 1
        elif isinstance(msg, FrameDone) and s is SessionState.FRAME_END:
            nxt = SessionState.READY
        elif isinstance(msg, Bye) and s in (SessionState.READY, SessionState.FRAME_END):
            nxt = SessionState.CLOSED

        if nxt is None:
            raise ProtocolError(f"{TAGS.get(type(msg), msg)} not allowed in state {s.value}")
        if isinstance(msg, (Obs, Act)):
            self.critical_messages += 1
        self.state = nxt
        return nxt


def is_legal(trace):
    session = Session()
    try:
        for msg in trace:
            session.accept(msg)
    except ProtocolError:
        return False
    return session.state is SessionState.CLOSED


# -------------------------------
# Overhead Model
# -------------------------------

def frame_overhead(decisions=2, message_ms=1.92, decision_ms=0.42):
    """Each decision costs one Obs, one Act and one Q-network run."""
    if decisions not in (0, 1, 2):
        raise ValueError("a frame has at most two decisions")
    per_decision = 2 * message_ms + decision_ms
    return Overhead(
        pre_ms=per_decision if decisions >= 1 else 0.0,
        mid_ms=per_decision if decisions == 2 else 0.0,
    )


# -------------------------------
# Stream Channels
# -------------------------------

class Connection:
    """Length-prefixed message stream over a connected socket."""

    def __init__(self, sock, timeout=10.0):
        self.sock = sock
        self.sock.settimeout(timeout)
        self.session = Session()
        self.sent = 0
        self.received = 0

    def _read_exact(self, n, at_boundary):
        chunks, got = [], 0
        while got < n:
            chunk = self.sock.recv(n - got)
            if not chunk:
                if at_boundary and got == 0:
                    raise ConnectionClosed("peer closed the connection")
                raise LengthMismatchError(f"stream truncated after {got} of {n} bytes")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def send(self, msg):
        self.session.accept(msg)
        self.sock.sendall(encode(msg))
        self.sent += 1

    def recv(self):
        (length,) = HEADER.unpack(self._read_exact(HEADER.size, at_boundary=True))
        if length > MAX_PAYLOAD:
            raise LengthMismatchError(f"payload of {length} bytes exceeds limit")
        msg = decode_payload(self._read_exact(length, at_boundary=False))
        self.session.accept(msg)
        self.received += 1
        return msg

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class DeviceChannel:
    """
    Device side of a session: turns Obs/Act round trips into a decision
    callback and piggybacks each frame outcome on the next Obs.
    """

    def __init__(self, conn):
        self.conn = conn
        self._pending_done = None

    def hello(self, device_profile, budget_ms=None):
        self.conn.send(Hello(device_profile, budget_ms))

    def decide(self, obs):
        done = None
        if obs.stage is Stage.FRAME_START:
            done, self._pending_done = self._pending_done, None
        self.conn.send(Obs.from_observation(obs, done))
        reply = self.conn.recv()
        return reply.action()

    def frame_done(self, result):
        self._pending_done = FrameDone.from_result(result)

    def close(self):
        if self._pending_done is not None:
            self.conn.send(self._pending_done)
            self._pending_done = None
        self.conn.send(Bye())


def serve_session(conn, handler):
    """
    Agent side of one session.

    `handler` provides hello(msg), decide(observation) -> Action and
    frame_done(result). Returns the number of completed frames.
    """
    hello = conn.recv()
    handler.hello(hello)
    while True:
        msg = conn.recv()
        if isinstance(msg, Bye):
            return conn.session.frames
        if isinstance(msg, FrameDone):
            handler.frame_done(msg.result())
            continue
        if msg.frame_done is not None:
            handler.frame_done(msg.frame_done.result())
        action = handler.decide(msg.observation())
        conn.send(Act.from_action(action))
