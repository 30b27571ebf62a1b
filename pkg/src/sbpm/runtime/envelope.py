"""Routed message envelopes."""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from typing import Any, Mapping

_CORRELATION_NS = uuid.UUID("6ba7b812-9dad-11d1-80b4-00c04fd430c8")


@dataclass(frozen=True)
class Envelope:
    instance_id: str
    from_subject: str
    to_subject: str
    message_id: str
    correlation_id: str
    seq: int
    payload: Any

    def to_json(self) -> dict:
        return {
            "instance": self.instance_id,
            "from": self.from_subject,
            "to": self.to_subject,
            "message": self.message_id,
            "correlation": self.correlation_id,
            "seq": self.seq,
            "payload": self.payload,
        }

    @staticmethod
    def from_json(data: Mapping) -> "Envelope":
        return Envelope(
            instance_id=data["instance"],
            from_subject=data["from"],
            to_subject=data["to"],
            message_id=data["message"],
            correlation_id=data["correlation"],
            seq=data["seq"],
            payload=data["payload"],
        )


def make_envelope(
    instance_id: str,
    from_subject: str,
    to_subject: str,
    message_id: str,
    seq: int,
    payload: Any,
) -> Envelope:
    # Correlation ids are derived, not random, so identical sends correlate
    # identically across retries and replays.
    correlation = uuid.uuid5(_CORRELATION_NS, f"{instance_id}:{from_subject}:{seq}")
    return Envelope(
        instance_id=instance_id,
        from_subject=from_subject,
        to_subject=to_subject,
        message_id=message_id,
        correlation_id=str(correlation),
        seq=seq,
        payload=payload,
    )
