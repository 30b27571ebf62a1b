"""Service-level metrics recomputable from the event log alone."""

from __future__ import annotations

from sbpm.runtime import events as ev

_WAIT_OPENERS = {"function", "receive", "send"}
_WAIT_CLOSERS = {ev.CHOICE_MADE, ev.MSG_CONSUMED, ev.TIMEOUT_FIRED, ev.SUBJECT_HALTED, ev.MSG_SENT, ev.CRASHED}


def compute_metrics(records) -> dict:
    """Instance duration plus per-subject time spent waiting on tasks/messages.

    Auto-sends close their interval immediately (MSG_SENT follows the entry
    within the same step), so only genuine task/message waits accumulate.
    """
    first_entered: int | None = None
    completed: int | None = None
    open_since: dict[str, int] = {}
    wait_ms: dict[str, int] = {}

    for r in records:
        if r.kind == ev.STATE_ENTERED:
            if first_entered is None:
                first_entered = r.ts
            if r.data.get("kind") in _WAIT_OPENERS:
                open_since[r.subject] = r.ts
            else:
                open_since.pop(r.subject, None)
        elif r.kind in _WAIT_CLOSERS:
            started = open_since.pop(r.subject, None)
            if started is not None:
                wait_ms[r.subject] = wait_ms.get(r.subject, 0) + (r.ts - started)
        elif r.kind == ev.INSTANCE_COMPLETED:
            completed = r.ts

    duration = completed - first_entered if completed is not None and first_entered is not None else None
    return {"instance_duration_ms": duration, "per_subject_wait_ms": wait_ms}
