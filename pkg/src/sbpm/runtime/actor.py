"""Pure per-subject state transitions.

actor_step is a pure function (ActorState, event) -> (ActorState, steps) where
each step pairs an effect with the actor snapshot as of that effect. The
supervisor commits the snapshot before acting on the effect (logging,
dispatching, opening tasks), which makes every log append an exact replay
boundary. An actor advances through states until it hits a wait point: a
task, an empty-match receive, a pending send ack, or an end state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from sbpm.compiler.bundle import Bundle
from sbpm.compiler.ir import EmitArm, IrState, SubjectProgram
from sbpm.model import PayloadError, validate_payload
from sbpm.runtime import semantics
from sbpm.runtime.envelope import Envelope, make_envelope
from sbpm.runtime.errors import NoSuchOutcome, PayloadInvalid

RUNNING = "running"
AWAITING_TASK = "awaiting_task"
AWAITING_MESSAGE = "awaiting_message"
BLOCKED_SEND = "blocked_send"
HALTED = "halted"
CRASHED = "crashed"


@dataclass(frozen=True)
class PendingSend:
    envelope: Envelope
    target: int


@dataclass(frozen=True)
class ActorState:
    subject: str
    current: int
    pool: tuple[Envelope, ...] = ()
    status: str = RUNNING
    send_seq: int = 0
    data: dict = field(default_factory=dict)
    epoch: int = 0
    pending_send: PendingSend | None = None

    def core_view(self) -> dict:
        """The externally observable slice compared by crash-replay tests."""
        return {
            "subject": self.subject,
            "current": self.current,
            "pool": [e.to_json() for e in self.pool],
            "status": self.status,
        }


# Events fed into actor_step.


@dataclass(frozen=True)
class TaskCompleted:
    outcome: str
    payload: Any = None


@dataclass(frozen=True)
class MessageAvailable:
    pass


@dataclass(frozen=True)
class TimeoutElapsed:
    epoch: int


@dataclass(frozen=True)
class SendAck:
    pass


@dataclass(frozen=True)
class SendNack:
    pass


ActorEvent = TaskCompleted | MessageAvailable | TimeoutElapsed | SendAck | SendNack


# Effects, each paired with the actor snapshot at emission time.


@dataclass(frozen=True)
class Entered:
    index: int
    state_id: str
    kind: str


@dataclass(frozen=True)
class ChoiceMade:
    state_id: str
    outcome: str
    payload: Any


@dataclass(frozen=True)
class Consumed:
    envelope: Envelope


@dataclass(frozen=True)
class TimedOut:
    state_id: str


@dataclass(frozen=True)
class SendRequested:
    envelope: Envelope
    target: int


@dataclass(frozen=True)
class TaskNeeded:
    kind: str  # "choose_outcome" | "provide_send_payload"
    state_id: str
    state_name: str
    options: tuple
    refinement: str | None = None
    on_error: str | None = None


@dataclass(frozen=True)
class TimerNeeded:
    ms: int
    epoch: int


@dataclass(frozen=True)
class Halted:
    state_id: str


@dataclass(frozen=True)
class UnconsumedWarning:
    count: int


Effect = (
    Entered
    | ChoiceMade
    | Consumed
    | TimedOut
    | SendRequested
    | TaskNeeded
    | TimerNeeded
    | Halted
    | UnconsumedWarning
)

Step = tuple[ActorState, Effect]


def bare_actor(bundle: Bundle, subject: str) -> ActorState:
    """An actor that exists (its pool can take deliveries) but has not entered yet."""
    program = bundle.program(subject)
    return ActorState(subject=subject, current=program.start_index, epoch=-1)


def actor_start(bundle: Bundle, actor: ActorState, instance_id: str) -> tuple[ActorState, list[Step]]:
    """Enter the start state of a bare actor."""
    program = bundle.program(actor.subject)
    steps: list[Step] = []
    actor = _enter(bundle, program, actor, instance_id, program.start_index, steps)
    return actor, steps


def actor_continue(bundle: Bundle, actor: ActorState, hint: tuple, instance_id: str) -> tuple[ActorState, list[Step]]:
    """Finish a transition whose tail was cut off the log (crash recovery).

    `hint` is the replay fold's record of the last committed half-step:
    ("choice", outcome, payload), ("timeout",), ("consume", envelope), or
    ("auto",) for an auto-send state entered but not yet sent.
    """
    program = bundle.program(actor.subject)
    state = program.state(actor.current)
    steps: list[Step] = []
    if hint[0] == "choice":
        outcome, payload = hint[1], hint[2]
        if state.kind == "function":
            arm = semantics.resolve_outcome(state, outcome)
            if arm is None:
                raise NoSuchOutcome(actor.subject, state.id, outcome)
            return _enter(bundle, program, actor, instance_id, arm.target, steps), steps
        arm = semantics.resolve_emit(state, outcome)
        if arm is None:
            raise NoSuchOutcome(actor.subject, state.id, outcome)
        return _request_send(actor, arm, payload or {}, instance_id, steps), steps
    if hint[0] == "timeout":
        arm = semantics.timeout_arm(state)
        if arm is None:
            raise NoSuchOutcome(actor.subject, state.id, "TIMEOUT")
        return _enter(bundle, program, actor, instance_id, arm.target, steps), steps
    if hint[0] == "consume":
        envelope = hint[1]
        for arm in semantics.match_arms(state):
            if arm.message == envelope.message_id and arm.from_subject == envelope.from_subject:
                return _enter(bundle, program, actor, instance_id, arm.target, steps), steps
        raise NoSuchOutcome(actor.subject, state.id, envelope.message_id)
    if hint[0] == "auto":
        arm = semantics.auto_send_arm(state)
        if arm is None:
            raise NoSuchOutcome(actor.subject, state.id, "auto-send")
        return _request_send(actor, arm, {}, instance_id, steps), steps
    raise ValueError(f"unknown resume hint {hint!r}")


def actor_step(
    bundle: Bundle, actor: ActorState, event: ActorEvent, instance_id: str
) -> tuple[ActorState, list[Step]]:
    program = bundle.program(actor.subject)
    state = program.state(actor.current)
    steps: list[Step] = []

    if isinstance(event, TaskCompleted):
        actor = _apply_task(bundle, program, actor, state, event, instance_id, steps)
    elif isinstance(event, MessageAvailable):
        if actor.status == AWAITING_MESSAGE:
            actor = _try_consume(bundle, program, actor, state, instance_id, steps)
    elif isinstance(event, TimeoutElapsed):
        if actor.status == AWAITING_MESSAGE and event.epoch == actor.epoch:
            arm = semantics.timeout_arm(state)
            if arm is not None:
                actor = replace(actor, status=RUNNING)
                steps.append((actor, TimedOut(state_id=state.id)))
                actor = _enter(bundle, program, actor, instance_id, arm.target, steps)
    elif isinstance(event, SendAck):
        pending = actor.pending_send
        if pending is not None:
            actor = replace(actor, pending_send=None, status=RUNNING)
            actor = _enter(bundle, program, actor, instance_id, pending.target, steps)
    elif isinstance(event, SendNack):
        if actor.pending_send is not None:
            actor = replace(actor, status=BLOCKED_SEND)
    return actor, steps


def _apply_task(
    bundle: Bundle,
    program: SubjectProgram,
    actor: ActorState,
    state: IrState,
    event: TaskCompleted,
    instance_id: str,
    steps: list[Step],
) -> ActorState:
    if actor.status != AWAITING_TASK:
        raise NoSuchOutcome(actor.subject, state.id, event.outcome)

    if state.kind == "function":
        arm = semantics.resolve_outcome(state, event.outcome)
        if arm is None:
            raise NoSuchOutcome(actor.subject, state.id, event.outcome)
        updates: dict = {"status": RUNNING}
        if event.payload is not None:
            updates["data"] = dict(event.payload)
        actor = replace(actor, **updates)
        steps.append((actor, ChoiceMade(state_id=state.id, outcome=event.outcome, payload=event.payload)))
        return _enter(bundle, program, actor, instance_id, arm.target, steps)

    if state.kind == "send":
        arm = semantics.resolve_emit(state, event.outcome)
        if arm is None:
            raise NoSuchOutcome(actor.subject, state.id, event.outcome)
        schema = bundle.schema(arm.bo) if arm.bo is not None else None
        try:
            payload = validate_payload(schema, event.payload)
        except PayloadError as exc:
            raise PayloadInvalid(str(exc)) from exc
        actor = replace(actor, status=RUNNING)
        steps.append((actor, ChoiceMade(state_id=state.id, outcome=event.outcome, payload=payload)))
        return _request_send(actor, arm, payload, instance_id, steps)

    raise NoSuchOutcome(actor.subject, state.id, event.outcome)


def _request_send(
    actor: ActorState, arm: EmitArm, payload: Any, instance_id: str, steps: list[Step]
) -> ActorState:
    seq = actor.send_seq + 1
    envelope = make_envelope(
        instance_id=instance_id,
        from_subject=actor.subject,
        to_subject=arm.to_subject,
        message_id=arm.message,
        seq=seq,
        payload=payload,
    )
    actor = replace(
        actor,
        send_seq=seq,
        status=RUNNING,
        pending_send=PendingSend(envelope=envelope, target=arm.target),
    )
    steps.append((actor, SendRequested(envelope=envelope, target=arm.target)))
    return actor


def _entry_status(program: SubjectProgram, state: IrState, index: int, pool: tuple) -> str:
    if program.is_end(index):
        return HALTED
    if state.kind == "function":
        return AWAITING_TASK
    if state.kind == "send":
        return RUNNING if semantics.auto_send_arm(state) is not None else AWAITING_TASK
    return RUNNING if semantics.find_match(state, pool) is not None else AWAITING_MESSAGE


def _enter(
    bundle: Bundle,
    program: SubjectProgram,
    actor: ActorState,
    instance_id: str,
    index: int,
    steps: list[Step],
) -> ActorState:
    """Advance into `index` and keep going until the actor has to wait."""
    while True:
        state = program.state(index)
        status = _entry_status(program, state, index, actor.pool)
        actor = replace(actor, current=index, epoch=actor.epoch + 1, status=status)
        steps.append((actor, Entered(index=index, state_id=state.id, kind=state.kind)))

        if program.is_end(index):
            steps.append((actor, Halted(state_id=state.id)))
            if actor.pool:
                steps.append((actor, UnconsumedWarning(count=len(actor.pool))))
            return actor

        if state.kind == "function":
            options = tuple(a.outcome for a in semantics.outcome_arms(state))
            steps.append(
                (
                    actor,
                    TaskNeeded(
                        kind="choose_outcome",
                        state_id=state.id,
                        state_name=state.name,
                        options=options,
                        refinement=state.refinement,
                        on_error=state.on_error,
                    ),
                )
            )
            return actor

        if state.kind == "send":
            arm = semantics.auto_send_arm(state)
            if arm is not None:
                return _request_send(actor, arm, {}, instance_id, steps)
            options = tuple((a.message, a.to_subject, a.bo) for a in semantics.emit_arms(state))
            steps.append(
                (
                    actor,
                    TaskNeeded(
                        kind="provide_send_payload",
                        state_id=state.id,
                        state_name=state.name,
                        options=options,
                    ),
                )
            )
            return actor

        # receive
        found = semantics.find_match(state, actor.pool)
        if found is None:
            if state.timeout_ms and semantics.timeout_arm(state) is not None:
                steps.append((actor, TimerNeeded(ms=state.timeout_ms, epoch=actor.epoch)))
            return actor
        pool_index, arm = found
        envelope = actor.pool[pool_index]
        actor = replace(actor, pool=actor.pool[:pool_index] + actor.pool[pool_index + 1 :], status=RUNNING)
        steps.append((actor, Consumed(envelope=envelope)))
        index = arm.target


def _try_consume(
    bundle: Bundle,
    program: SubjectProgram,
    actor: ActorState,
    state: IrState,
    instance_id: str,
    steps: list[Step],
) -> ActorState:
    found = semantics.find_match(state, actor.pool)
    if found is None:
        return actor
    pool_index, arm = found
    envelope = actor.pool[pool_index]
    actor = replace(
        actor, pool=actor.pool[:pool_index] + actor.pool[pool_index + 1 :], status=RUNNING
    )
    steps.append((actor, Consumed(envelope=envelope)))
    return _enter(bundle, program, actor, instance_id, arm.target, steps)
