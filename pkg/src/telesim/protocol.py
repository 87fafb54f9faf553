"""Topic envelope wire protocol and session logs.

One envelope per line: UTF-8 JSON with the fixed fields `topic`,
`stamp`, `seq`, `payload`, keys sorted, floats rounded to nine fraction
digits.  The canonical byte form is what gets hashed for record/replay
verification, so encoding the same envelope always yields identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

__all__ = [
    "DecodeError",
    "Envelope",
    "SessionLog",
    "StreamDecoder",
    "decode_envelope",
    "encode_envelope",
    "topic_hashes",
]

FLOAT_DIGITS = 9

COMMAND_TOPICS = frozenset(
    {
        "cmd_vel",
        "cmd_ee_pose",
        "cmd_joint_traj",
        "cmd_head",
        "cmd_gripper",
        "cmd_baseline",
        "cmd_goal",
    }
)

TELEMETRY_TOPICS = frozenset(
    {
        "pose2d",
        "wheel_states",
        "joint_states",
        "ptru_state",
        "imu_body",
        "imu_head",
        "scan",
        "sonar",
        "map_delta",
        "bus_cycle",
        "camera_pose",
        "plan",
        "ik_preview",
        "error",
    }
)


class DecodeError(ValueError):
    """Malformed envelope line; carries the byte offset when known."""

    def __init__(self, message: str, byte_offset: int | None = None):
        self.byte_offset = byte_offset
        where = f" at byte {byte_offset}" if byte_offset is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Envelope:
    topic: str
    stamp: float
    seq: int
    payload: Any


def _quantize(value: Any) -> Any:
    """Round floats to the wire precision; -0.0 normalizes to 0.0."""
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("wire payloads cannot carry non-finite numbers")
        q = round(value, FLOAT_DIGITS)
        return 0.0 if q == 0.0 else q
    if isinstance(value, dict):
        return {k: _quantize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_quantize(v) for v in value]
    return value


def encode_envelope(env: Envelope) -> bytes:
    """Canonical newline-terminated byte form of one envelope."""
    record = {
        "topic": env.topic,
        "stamp": _quantize(float(env.stamp)),
        "seq": int(env.seq),
        "payload": _quantize(env.payload),
    }
    line = json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return line.encode("utf-8") + b"\n"


def canonicalize_envelope(env: Envelope) -> Envelope:
    """Snap an envelope to wire precision, as if it had crossed the wire."""
    return Envelope(
        env.topic, _quantize(float(env.stamp)), int(env.seq), _quantize(env.payload)
    )


def decode_envelope(line: bytes | str, byte_offset: int | None = None) -> Envelope:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"invalid UTF-8: {exc}", byte_offset) from None
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"invalid JSON: {exc.msg}", byte_offset) from None
    if not isinstance(record, dict):
        raise DecodeError("envelope must be a JSON object", byte_offset)
    for key in ("topic", "stamp", "seq", "payload"):
        if key not in record:
            raise DecodeError(f"missing field {key!r}", byte_offset)
    topic = record["topic"]
    if not isinstance(topic, str) or not topic:
        raise DecodeError("topic must be a non-empty string", byte_offset)
    if not isinstance(record["stamp"], (int, float)) or isinstance(record["stamp"], bool):
        raise DecodeError("stamp must be a number", byte_offset)
    if not isinstance(record["seq"], int) or isinstance(record["seq"], bool):
        raise DecodeError("seq must be an integer", byte_offset)
    return Envelope(topic, float(record["stamp"]), record["seq"], record["payload"])


class StreamDecoder:
    """Incremental line splitter with offset tracking and topic filtering.

    Unknown topics are skipped (counted) for forward compatibility;
    malformed lines raise DecodeError with the byte offset of the line.
    """

    def __init__(self, known_topics: frozenset[str] | None = None):
        self.known_topics = known_topics
        self.unknown_topic_count = 0
        self.byte_offset = 0
        self._buffer = b""

    def feed(self, data: bytes) -> list[Envelope]:
        self._buffer += data
        out: list[Envelope] = []
        while True:
            nl = self._buffer.find(b"\n")
            if nl == -1:
                break
            line = self._buffer[:nl]
            self._buffer = self._buffer[nl + 1 :]
            offset = self.byte_offset
            self.byte_offset += nl + 1
            if not line.strip():
                continue
            env = decode_envelope(line, byte_offset=offset)
            if self.known_topics is not None and env.topic not in self.known_topics:
                self.unknown_topic_count += 1
                continue
            out.append(env)
        return out


@dataclass
class SessionLog:
    """Direction-tagged envelope record of one deterministic session."""

    config_hash: str
    scenario_hash: str
    seed: int
    duration_ticks: int = 0
    latency_delay_s: float = 0.0
    latency_jitter_s: float = 0.0
    records: list[tuple[str, Envelope]] = field(default_factory=list)  # ("in"|"out", env)

    def append(self, direction: str, env: Envelope) -> None:
        if direction not in ("in", "out"):
            raise ValueError("direction must be 'in' or 'out'")
        self.records.append((direction, env))

    def inbound(self) -> list[Envelope]:
        return [e for d, e in self.records if d == "in"]

    def outbound(self) -> list[Envelope]:
        return [e for d, e in self.records if d == "out"]

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            header = {
                "kind": "session",
                "config_hash": self.config_hash,
                "scenario_hash": self.scenario_hash,
                "seed": self.seed,
                "duration_ticks": self.duration_ticks,
                "latency_delay_s": self.latency_delay_s,
                "latency_jitter_s": self.latency_jitter_s,
            }
            fh.write(
                json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
                + b"\n"
            )
            for direction, env in self.records:
                body = encode_envelope(env).rstrip(b"\n")
                fh.write(b'{"dir":"' + direction.encode() + b'",' + body[1:] + b"\n")

    @classmethod
    def load(cls, path: str | Path) -> "SessionLog":
        with open(path, "rb") as fh:
            lines = fh.read().split(b"\n")
        if not lines or not lines[0].strip():
            raise DecodeError("empty session log", 0)
        header = json.loads(lines[0])
        if header.get("kind") != "session":
            raise DecodeError("missing session header", 0)
        log = cls(
            config_hash=header["config_hash"],
            scenario_hash=header["scenario_hash"],
            seed=int(header["seed"]),
            duration_ticks=int(header.get("duration_ticks", 0)),
            latency_delay_s=float(header.get("latency_delay_s", 0.0)),
            latency_jitter_s=float(header.get("latency_jitter_s", 0.0)),
        )
        for line in lines[1:]:
            if line.strip():
                record = json.loads(line)
                direction = record.pop("dir")
                env = Envelope(
                    record["topic"], float(record["stamp"]), record["seq"],
                    record["payload"],
                )
                log.append(direction, env)
        return log


def scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def topic_hashes(envelopes: Iterable[Envelope]) -> dict[str, str]:
    """Per-topic sha256 over the canonical byte stream, plus '*' overall."""
    hashers: dict[str, hashlib._hashlib.HASH] = {}
    overall = hashlib.sha256()
    for env in envelopes:
        blob = encode_envelope(env)
        overall.update(blob)
        hashers.setdefault(env.topic, hashlib.sha256()).update(blob)
    out = {topic: h.hexdigest() for topic, h in hashers.items()}
    out["*"] = overall.hexdigest()
    return out
