"""Append-only per-instance event log: one canonical JSON record per line."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from sbpm.runtime.errors import LogCorrupt

SUPERVISOR = "SUPERVISOR"

STATE_ENTERED = "STATE_ENTERED"
MSG_SENT = "MSG_SENT"
MSG_DELIVERED = "MSG_DELIVERED"
MSG_CONSUMED = "MSG_CONSUMED"
CHOICE_MADE = "CHOICE_MADE"
TIMEOUT_FIRED = "TIMEOUT_FIRED"
CRASHED = "CRASHED"
RESTARTED = "RESTARTED"
SUBJECT_HALTED = "SUBJECT_HALTED"
INSTANCE_COMPLETED = "INSTANCE_COMPLETED"

EVENT_KINDS = frozenset(
    {
        STATE_ENTERED,
        MSG_SENT,
        MSG_DELIVERED,
        MSG_CONSUMED,
        CHOICE_MADE,
        TIMEOUT_FIRED,
        CRASHED,
        RESTARTED,
        SUBJECT_HALTED,
        INSTANCE_COMPLETED,
    }
)


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts: int
    subject: str
    kind: str
    data: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "ts": self.ts, "subject": self.subject, "kind": self.kind, "data": self.data}

    def to_line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @staticmethod
    def from_json(data: dict) -> "EventRecord":
        return EventRecord(
            seq=data["seq"], ts=data["ts"], subject=data["subject"], kind=data["kind"], data=data["data"]
        )


class EventLog:
    """Gapless, append-only record sequence, optionally mirrored to a file.

    Appends flush per record so a crash loses at most the record being written.
    """

    def __init__(
        self,
        path: "Path | str | None" = None,
        on_append: "Callable[[EventRecord], None] | None" = None,
        preload: "Iterable[EventRecord] | None" = None,
    ):
        self._records: list[EventRecord] = list(preload) if preload is not None else []
        self._lock = threading.Lock()
        self._file = open(path, "a", encoding="utf-8") if path is not None else None
        self.on_append = on_append

    def append(self, subject: str, kind: str, data: "dict | None" = None) -> EventRecord:
        with self._lock:
            record = EventRecord(
                seq=len(self._records) + 1,
                ts=int(time.time() * 1000),
                subject=subject,
                kind=kind,
                data=data or {},
            )
            self._records.append(record)
            if self._file is not None:
                self._file.write(record.to_line() + "\n")
                self._file.flush()
        if self.on_append is not None:
            self.on_append(record)
        return record

    def records(self) -> tuple[EventRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None


def read_log(path: "Path | str") -> tuple[EventRecord, ...]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(EventRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise LogCorrupt(f"line {lineno}: {exc}") from exc
    return tuple(records)


def check_gapless(records: Iterable[EventRecord]) -> None:
    expected = 1
    for r in records:
        if r.seq != expected:
            raise LogCorrupt(f"sequence gap: expected {expected}, found {r.seq}")
        if r.kind not in EVENT_KINDS:
            raise LogCorrupt(f"unknown event kind {r.kind!r} at seq {r.seq}")
        expected += 1


def envelope_data(envelope) -> dict[str, Any]:
    return {"envelope": envelope.to_json()}
