"""Immutable model types: interaction declarations plus one behavior graph per subject.

All types are frozen dataclasses with tuple-valued collections, so a parsed
model can be shared freely across threads and compared structurally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

IDENT_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_-]{0,63}$")

# Reserved transition label for the timer arm of a receive state.
TIMEOUT_LABEL = "TIMEOUT"

DEFAULT_POOL_CAPACITY = 16

STATE_KINDS = ("function", "send", "receive")
FIELD_TYPES = ("string", "number", "boolean", "record", "list")


def is_ident(s: str) -> bool:
    return bool(IDENT_RE.match(s))


@dataclass(frozen=True)
class SubjectDecl:
    id: str
    name: str
    role: str
    external: bool = False
    pool_capacity: int = DEFAULT_POOL_CAPACITY


@dataclass(frozen=True)
class MessageDecl:
    id: str
    name: str
    from_subject: str
    to_subject: str
    bo: str | None = None


@dataclass(frozen=True)
class BoField:
    name: str
    type: str
    required: bool = False
    children: tuple[BoField, ...] = ()


@dataclass(frozen=True)
class BoSchema:
    id: str
    fields: tuple[BoField, ...] = ()


@dataclass(frozen=True)
class FunctionLabel:
    """Outcome chosen by the agent working the function state."""

    outcome: str


@dataclass(frozen=True)
class SendLabel:
    message: str
    to_subject: str


@dataclass(frozen=True)
class ReceiveLabel:
    message: str
    from_subject: str


@dataclass(frozen=True)
class TimeoutLabel:
    pass


TransitionLabel = FunctionLabel | SendLabel | ReceiveLabel | TimeoutLabel


@dataclass(frozen=True)
class Transition:
    from_state: str
    to_state: str
    label: TransitionLabel


@dataclass(frozen=True)
class State:
    id: str
    name: str
    kind: str
    start: bool = False
    end: bool = False
    refinement: str | None = None
    on_error: str | None = None
    timeout_ms: int | None = None


@dataclass(frozen=True)
class BehaviorGraph:
    subject: str
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]

    def state_by_id(self, state_id: str) -> State:
        for s in self.states:
            if s.id == state_id:
                return s
        raise KeyError(state_id)

    @property
    def start_state(self) -> State:
        for s in self.states:
            if s.start:
                return s
        raise ValueError(f"behavior {self.subject!r} has no start state")

    def outgoing(self, state_id: str) -> tuple[Transition, ...]:
        # Document order preserved; receive matching depends on it.
        return tuple(t for t in self.transitions if t.from_state == state_id)


@dataclass(frozen=True)
class ProcessModel:
    id: str
    name: str
    version: str
    subjects: tuple[SubjectDecl, ...]
    messages: tuple[MessageDecl, ...]
    bo_schemas: tuple[BoSchema, ...] = ()
    behaviors: dict[str, BehaviorGraph] = field(default_factory=dict)

    def subject_by_id(self, subject_id: str) -> SubjectDecl:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    def message_by_id(self, message_id: str) -> MessageDecl:
        for m in self.messages:
            if m.id == message_id:
                return m
        raise KeyError(message_id)

    def schema_by_id(self, schema_id: str) -> BoSchema:
        for s in self.bo_schemas:
            if s.id == schema_id:
                return s
        raise KeyError(schema_id)

    def internal_subjects(self) -> tuple[SubjectDecl, ...]:
        return tuple(s for s in self.subjects if not s.external)

    def external_subjects(self) -> tuple[SubjectDecl, ...]:
        return tuple(s for s in self.subjects if s.external)
