"""Deterministic reconstruction of instance state from its event log.

The fold mirrors the supervisor's commit order exactly: the supervisor
commits each in-memory mutation before appending the record describing it,
so replaying any log prefix reproduces the live state at that append
boundary. Nondeterministic inputs (choices, consumption order, timeouts,
send payloads) come from the log; everything else is recomputed from the
bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from sbpm.compiler.bundle import Bundle
from sbpm.compiler.ir import IrState
from sbpm.runtime import events as ev
from sbpm.runtime import semantics
from sbpm.runtime.actor import (
    AWAITING_MESSAGE,
    AWAITING_TASK,
    BLOCKED_SEND,
    CRASHED,
    HALTED,
    RUNNING,
    ActorState,
    PendingSend,
)
from sbpm.runtime.envelope import Envelope
from sbpm.runtime.errors import BundleMismatch, LogCorrupt

STATUS_RUNNING = "running"
STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"


@dataclass
class InstanceView:
    """Supervisor view over one instance, reconstructed or live."""

    instance_id: str
    bundle_hash: str
    actors: dict[str, ActorState]
    bindings: dict[str, str]
    status: str
    log: tuple[ev.EventRecord, ...]

    def core_view(self) -> dict:
        return {
            "status": self.status,
            "actors": {s: a.core_view() for s, a in sorted(self.actors.items())},
        }


@dataclass
class ReplayResult:
    instance: InstanceView
    # Sent but not yet delivered at the end of the prefix, in send order.
    outstanding: list[Envelope] = field(default_factory=list)
    # Senders whose envelope was delivered but whose advance is not logged yet.
    unacked: list[str] = field(default_factory=list)
    # Mid-transition continuations for actors whose commit tail was cut off:
    # subject -> ("choice", outcome, payload) | ("timeout",) | ("consume", envelope)
    hints: dict = field(default_factory=dict)


def checkpoint_replay(log: Sequence[ev.EventRecord], bundle: Bundle) -> InstanceView:
    return replay_records(log, bundle).instance


def replay_records(
    log: Iterable[ev.EventRecord],
    bundle: Bundle,
    local_subjects: "Sequence[str] | None" = None,
) -> ReplayResult:
    records = tuple(log)
    ev.check_gapless(records)

    subjects = {p.subject: p for p in bundle.programs}
    # The live supervisor creates every hosted actor before any of them enters,
    # so the fold starts from the same bare-actor state.
    hosted = tuple(local_subjects) if local_subjects is not None else tuple(subjects)
    actors: dict[str, ActorState] = {
        s: ActorState(subject=s, current=subjects[s].start_index, epoch=-1) for s in hosted
    }
    status = STATUS_RUNNING
    instance_id = ""
    outstanding: dict[tuple[str, int], Envelope] = {}
    hints: dict[str, tuple] = {}
    capacity = {sid: cap for sid, cap in bundle.pool_capacities}

    def program_state(subject: str, index: int) -> IrState:
        program = subjects.get(subject)
        if program is None:
            raise BundleMismatch(subject, "not in bundle")
        if index >= len(program.states):
            raise BundleMismatch(f"{subject}[{index}]", "state index out of range")
        return program.states[index]

    def pool_full(subject: str) -> bool:
        actor = actors.get(subject)
        pool_len = len(actor.pool) if actor is not None else 0
        return pool_len >= capacity.get(subject, 16)

    for record in records:
        subject, kind, data = record.subject, record.kind, record.data
        envelope = Envelope.from_json(data["envelope"]) if "envelope" in data else None
        if envelope is not None and not instance_id:
            instance_id = envelope.instance_id

        if kind == ev.STATE_ENTERED:
            index = data["index"]
            state = program_state(subject, index)
            if state.id != data["state"]:
                raise BundleMismatch(data["state"], f"bundle has {state.id} at index {index}")
            program = subjects[subject]
            prior = actors.get(subject)
            actor = prior if prior is not None else ActorState(subject=subject, current=index, epoch=-1)
            actor = replace(
                actor,
                current=index,
                epoch=actor.epoch + 1,
                pending_send=None,
                status=_entry_status(program, state, index, actor.pool),
            )
            actors[subject] = actor
            hints.pop(subject, None)

        elif kind == ev.CHOICE_MADE:
            actor = _require(actors, subject)
            payload = data.get("payload")
            updates: dict = {"status": RUNNING}
            if payload is not None and subjects[subject].states[actor.current].kind == "function":
                updates["data"] = dict(payload)
            actors[subject] = replace(actor, **updates)
            hints[subject] = ("choice", data["outcome"], payload)

        elif kind == ev.MSG_SENT:
            assert envelope is not None
            actor = _require(actors, subject)
            state = program_state(subject, actor.current)
            arm = semantics.resolve_emit(state, envelope.message_id)
            if arm is None:
                raise BundleMismatch(envelope.message_id, f"state {state.id} has no such send arm")
            outstanding[(envelope.from_subject, envelope.seq)] = envelope
            local_target = envelope.to_subject in actors
            blocked = local_target and pool_full(envelope.to_subject)
            actors[subject] = replace(
                actor,
                send_seq=max(actor.send_seq, envelope.seq),
                pending_send=PendingSend(envelope=envelope, target=arm.target),
                status=BLOCKED_SEND if blocked else RUNNING,
            )
            hints.pop(subject, None)

        elif kind == ev.MSG_DELIVERED:
            assert envelope is not None
            actor = actors.get(subject)
            if actor is None:
                # Deliveries can land before the target's own first entry
                # (start-state auto-sends during instance startup).
                program = subjects.get(subject)
                if program is None:
                    raise LogCorrupt(f"delivery to unknown actor {subject!r} at seq {record.seq}")
                actor = ActorState(subject=subject, current=program.start_index, epoch=-1)
            actors[subject] = replace(actor, pool=actor.pool + (envelope,))
            outstanding.pop((envelope.from_subject, envelope.seq), None)

        elif kind == ev.MSG_CONSUMED:
            assert envelope is not None
            actor = _require(actors, subject)
            idx = _pool_index(actor, envelope)
            if idx is None:
                raise LogCorrupt(f"{subject} consumed {envelope.message_id}#{envelope.seq} not in its pool")
            actors[subject] = replace(
                actor, pool=actor.pool[:idx] + actor.pool[idx + 1 :], status=RUNNING
            )
            hints[subject] = ("consume", envelope)

        elif kind == ev.TIMEOUT_FIRED:
            actor = _require(actors, subject)
            actors[subject] = replace(actor, status=RUNNING)
            hints[subject] = ("timeout",)

        elif kind == ev.CRASHED:
            if subject == ev.SUPERVISOR:
                status = STATUS_FAILED
            else:
                actor = _require(actors, subject)
                actors[subject] = replace(actor, status=CRASHED)
                hints.pop(subject, None)

        elif kind == ev.RESTARTED:
            actor = _require(actors, subject)
            state = program_state(subject, actor.current)
            actors[subject] = replace(
                actor,
                status=_entry_status(subjects[subject], state, actor.current, actor.pool),
            )
            hints.pop(subject, None)

        elif kind == ev.SUBJECT_HALTED:
            actor = _require(actors, subject)
            actors[subject] = replace(actor, status=HALTED)

        elif kind == ev.INSTANCE_COMPLETED:
            status = STATUS_COMPLETED

    unacked = [
        s
        for s, a in actors.items()
        if a.pending_send is not None
        and (a.pending_send.envelope.from_subject, a.pending_send.envelope.seq) not in outstanding
        and a.status not in (HALTED, CRASHED)
    ]
    view = InstanceView(
        instance_id=instance_id,
        bundle_hash=bundle.manifest.content_hash,
        actors=actors,
        bindings={},
        status=status,
        log=records,
    )
    return ReplayResult(
        instance=view, outstanding=list(outstanding.values()), unacked=unacked, hints=hints
    )


def _entry_status(program, state: IrState, index: int, pool: tuple) -> str:
    """Status the live supervisor shows right after appending STATE_ENTERED."""
    if program.is_end(index):
        # SUBJECT_HALTED follows immediately; the live actor is already halted
        # when the entry record lands.
        return HALTED
    if state.kind == "function":
        return AWAITING_TASK
    if state.kind == "send":
        return RUNNING if semantics.auto_send_arm(state) is not None else AWAITING_TASK
    return RUNNING if semantics.find_match(state, pool) is not None else AWAITING_MESSAGE


def _require(actors: dict[str, ActorState], subject: str) -> ActorState:
    actor = actors.get(subject)
    if actor is None:
        raise LogCorrupt(f"event for {subject!r} before its first STATE_ENTERED")
    return actor


def _pool_index(actor: ActorState, envelope: Envelope) -> int | None:
    for i, e in enumerate(actor.pool):
        if e.from_subject == envelope.from_subject and e.seq == envelope.seq:
            return i
    return None
