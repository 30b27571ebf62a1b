"""Framed wire protocol between node dispatchers.

Frame = 4-byte big-endian payload length + canonical-JSON payload
`{v:1, kind, node, instance?, envelope?, ack_seq?, reason?}`. Frames over
16 MiB are rejected from the length prefix alone, before any allocation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

from sbpm.runtime.envelope import Envelope

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 16 * 1024 * 1024

HELLO = "HELLO"
HELLO_ACK = "HELLO_ACK"
MSG = "MSG"
ACK = "ACK"
NACK = "NACK"
PING = "PING"
PONG = "PONG"

FRAME_KINDS = frozenset({HELLO, HELLO_ACK, MSG, ACK, NACK, PING, PONG})


class WireError(Exception):
    pass


class FrameTooLarge(WireError):
    def __init__(self, size: int) -> None:
        super().__init__(f"declared frame length {size} exceeds {MAX_FRAME_BYTES}")
        self.size = size


class BadJson(WireError):
    pass


class UnsupportedVersion(WireError):
    def __init__(self, version) -> None:
        super().__init__(f"unsupported protocol version {version!r}")
        self.version = version


@dataclass(frozen=True)
class WireFrame:
    kind: str
    node: str
    instance: str | None = None
    envelope: Envelope | None = None
    ack_seq: int | None = None
    reason: str | None = None


def encode_frame(frame: WireFrame) -> bytes:
    if frame.kind not in FRAME_KINDS:
        raise WireError(f"unknown frame kind {frame.kind!r}")
    payload: dict = {"v": PROTOCOL_VERSION, "kind": frame.kind, "node": frame.node}
    if frame.instance is not None:
        payload["instance"] = frame.instance
    if frame.envelope is not None:
        payload["envelope"] = frame.envelope.to_json()
    if frame.ack_seq is not None:
        payload["ack_seq"] = frame.ack_seq
    if frame.reason is not None:
        payload["reason"] = frame.reason
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise FrameTooLarge(len(body))
    return struct.pack(">I", len(body)) + body


def decode_frame(data: bytes) -> WireFrame:
    if len(data) < 4:
        raise BadJson("frame shorter than its length prefix")
    (length,) = struct.unpack(">I", data[:4])
    if length > MAX_FRAME_BYTES:
        raise FrameTooLarge(length)
    if len(data) != 4 + length:
        raise BadJson(f"length prefix says {length} bytes, got {len(data) - 4}")
    return decode_payload(data[4:])


def decode_payload(body: bytes) -> WireFrame:
    try:
        payload = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadJson(str(exc)) from exc
    if not isinstance(payload, dict):
        raise BadJson("frame payload must be a JSON object")
    version = payload.get("v")
    if version != PROTOCOL_VERSION:
        raise UnsupportedVersion(version)
    kind = payload.get("kind")
    if kind not in FRAME_KINDS:
        raise BadJson(f"unknown frame kind {kind!r}")
    node = payload.get("node")
    if not isinstance(node, str):
        raise BadJson("frame is missing its node id")
    envelope = None
    if "envelope" in payload:
        try:
            envelope = Envelope.from_json(payload["envelope"])
        except (KeyError, TypeError) as exc:
            raise BadJson(f"bad envelope: {exc}") from exc
    return WireFrame(
        kind=kind,
        node=node,
        instance=payload.get("instance"),
        envelope=envelope,
        ack_seq=payload.get("ack_seq"),
        reason=payload.get("reason"),
    )


def read_frame_from(read_exactly) -> WireFrame:
    """Read one frame via `read_exactly(n) -> bytes` (socket or file adapter)."""
    header = read_exactly(4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise FrameTooLarge(length)
    return decode_payload(read_exactly(length))
