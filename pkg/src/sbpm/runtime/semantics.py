"""Arm resolution and receive matching, shared by the live actor step, the
replayer, and the soundness explorer so all three agree by construction.

Receive matching rule: scan the pool front to back; the first envelope that
matches any receive arm is consumed, through the first matching arm in
document order. Timeout arms never participate in matching and a timeout is
only enabled while no pool entry matches.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from sbpm.compiler.ir import EmitArm, IrState, MatchArm, OutcomeArm, TimeoutArm


class MessageLike(Protocol):
    message_id: str
    from_subject: str


def outcome_arms(state: IrState) -> tuple[OutcomeArm, ...]:
    return tuple(a for a in state.arms if isinstance(a, OutcomeArm))


def emit_arms(state: IrState) -> tuple[EmitArm, ...]:
    return tuple(a for a in state.arms if isinstance(a, EmitArm))


def match_arms(state: IrState) -> tuple[MatchArm, ...]:
    return tuple(a for a in state.arms if isinstance(a, MatchArm))


def timeout_arm(state: IrState) -> TimeoutArm | None:
    for a in state.arms:
        if isinstance(a, TimeoutArm):
            return a
    return None


def resolve_outcome(state: IrState, outcome: str) -> OutcomeArm | None:
    for a in outcome_arms(state):
        if a.outcome == outcome:
            return a
    return None


def resolve_emit(state: IrState, message_id: str) -> EmitArm | None:
    for a in emit_arms(state):
        if a.message == message_id:
            return a
    return None


def auto_send_arm(state: IrState) -> EmitArm | None:
    """The single no-payload arm of a send state that fires without a task."""
    arms = emit_arms(state)
    if len(arms) == 1 and arms[0].bo is None:
        return arms[0]
    return None


def find_match(state: IrState, pool: Sequence[MessageLike]) -> tuple[int, MatchArm] | None:
    """Return (pool index, arm) for the first matching envelope, or None."""
    arms = match_arms(state)
    for i, item in enumerate(pool):
        for arm in arms:
            if arm.message == item.message_id and arm.from_subject == item.from_subject:
                return i, arm
    return None
