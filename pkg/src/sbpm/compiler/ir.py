"""Executable FSM tables: one indexed program per subject.

State indices follow SBD document order (state at index i is the (i+1)-th
state element of the file). Arm order follows transition document order,
except that a timeout arm always sits last; receive matching never looks at
timeout arms, so the move is semantics-preserving.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class OutcomeArm:
    outcome: str
    target: int


@dataclass(frozen=True)
class EmitArm:
    message: str
    to_subject: str
    bo: str | None
    target: int


@dataclass(frozen=True)
class MatchArm:
    message: str
    from_subject: str
    target: int


@dataclass(frozen=True)
class TimeoutArm:
    target: int


IrArm = OutcomeArm | EmitArm | MatchArm | TimeoutArm


@dataclass(frozen=True)
class IrState:
    id: str
    name: str
    kind: str
    arms: tuple[IrArm, ...]
    refinement: str | None = None
    on_error: str | None = None
    timeout_ms: int | None = None


@dataclass(frozen=True)
class SubjectProgram:
    subject: str
    states: tuple[IrState, ...]
    start_index: int
    end_indices: frozenset[int]

    def state(self, index: int) -> IrState:
        return self.states[index]

    def index_of(self, state_id: str) -> int:
        for i, s in enumerate(self.states):
            if s.id == state_id:
                return i
        raise KeyError(state_id)

    def is_end(self, index: int) -> bool:
        return index in self.end_indices


@dataclass(frozen=True)
class RestartPolicy:
    kind: str = "replay"  # "never" | "replay"
    max_restarts: int = 3
    window_s: int = 30

    @staticmethod
    def never() -> "RestartPolicy":
        return RestartPolicy(kind="never", max_restarts=0, window_s=0)

    @staticmethod
    def replay(max_restarts: int = 3, window_s: int = 30) -> "RestartPolicy":
        return RestartPolicy(kind="replay", max_restarts=max_restarts, window_s=window_s)


@dataclass(frozen=True)
class SupervisorConfig:
    restart_policy: RestartPolicy = field(default_factory=RestartPolicy)
    metrics: tuple[str, ...] = ("instance_duration", "per_subject_wait_time")
    external_routes: tuple[tuple[str, str], ...] = ()
