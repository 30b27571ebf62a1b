"""Bounded behavioral soundness: exhaustive BFS over the product of the
subject FSMs under the runtime's own matching and blocking-send semantics.

A model is unsound iff some reachable global state leaves at least one
subject short of an end state with no step enabled anywhere (deadlock).
Pools are truncated at the configured bound; a send into a full pool is
disabled, not an error, so cycles of mutually blocked senders surface as
deadlocks. Timeout arms are explored as an always-eventually-enabled
alternative whenever no pool entry matches.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

from sbpm.compiler import SubjectProgram, compile_subject
from sbpm.model import ProcessModel
from sbpm.runtime import semantics
from sbpm.validate.diagnostics import V_SOUND_02, WARNING, Diagnostic

SOUND = "sound"
UNSOUND = "unsound"
INCONCLUSIVE = "inconclusive"


class PoolItem(NamedTuple):
    message_id: str
    from_subject: str


@dataclass(frozen=True)
class ProductState:
    """Global snapshot: one location per subject plus every (bounded) pool."""

    locations: dict[str, str]
    pools: dict[str, tuple[PoolItem, ...]]

    def to_json(self) -> dict:
        return {
            "locations": dict(sorted(self.locations.items())),
            "pools": {s: [[i.message_id, i.from_subject] for i in pool] for s, pool in sorted(self.pools.items())},
        }


@dataclass(frozen=True)
class ChooseStep:
    subject: str
    outcome: str

    def to_json(self) -> dict:
        return {"type": "choose", "subject": self.subject, "outcome": self.outcome}


@dataclass(frozen=True)
class SendStep:
    subject: str
    message: str
    to_subject: str

    def to_json(self) -> dict:
        return {"type": "send", "subject": self.subject, "message": self.message, "to": self.to_subject}


@dataclass(frozen=True)
class ConsumeStep:
    subject: str
    message: str
    from_subject: str

    def to_json(self) -> dict:
        return {"type": "consume", "subject": self.subject, "message": self.message, "from": self.from_subject}


@dataclass(frozen=True)
class TimeoutStep:
    subject: str

    def to_json(self) -> dict:
        return {"type": "timeout", "subject": self.subject}


GlobalStep = ChooseStep | SendStep | ConsumeStep | TimeoutStep


@dataclass
class SoundnessReport:
    verdict: str
    explored: int
    counterexample: "tuple[GlobalStep, ...] | None"
    cap_hit: bool
    # Non-normative extras consumed by validate() and the test suite.
    deadlock: "ProductState | None" = None
    warnings: tuple = ()
    bound: int = 1

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "explored": self.explored,
            "cap_hit": self.cap_hit,
            "counterexample": None if self.counterexample is None else [s.to_json() for s in self.counterexample],
        }


class _Space:
    """Product transition relation over the compiled programs."""

    def __init__(self, m: ProcessModel, pool_bound: int):
        self.subjects = tuple(sorted(s.id for s in m.internal_subjects()))
        self.programs: dict[str, SubjectProgram] = {s: compile_subject(m, s) for s in self.subjects}
        self.bound = {
            s.id: min(s.pool_capacity, pool_bound) for s in m.internal_subjects()
        }

    def initial(self) -> tuple:
        locations = tuple(self.programs[s].start_index for s in self.subjects)
        pools = tuple(() for _ in self.subjects)
        return locations, pools

    def is_final(self, key: tuple) -> bool:
        locations, _ = key
        return all(
            self.programs[s].is_end(locations[i]) for i, s in enumerate(self.subjects)
        )

    def steps(self, key: tuple) -> list[tuple[GlobalStep, tuple]]:
        """Enabled steps in canonical order: subjects sorted, arms in document order."""
        locations, pools = key
        out: list[tuple[GlobalStep, tuple]] = []
        index = {s: i for i, s in enumerate(self.subjects)}
        for i, subject in enumerate(self.subjects):
            program = self.programs[subject]
            if program.is_end(locations[i]):
                continue
            state = program.state(locations[i])
            if state.kind == "function":
                for arm in semantics.outcome_arms(state):
                    nxt = (_move(locations, i, arm.target), pools)
                    out.append((ChooseStep(subject, arm.outcome), nxt))
            elif state.kind == "send":
                for arm in semantics.emit_arms(state):
                    j = index[arm.to_subject]
                    if len(pools[j]) >= self.bound[arm.to_subject]:
                        continue  # blocking send: disabled while the pool is full
                    new_pools = _append(pools, j, PoolItem(arm.message, subject))
                    nxt = (_move(locations, i, arm.target), new_pools)
                    out.append((SendStep(subject, arm.message, arm.to_subject), nxt))
            else:  # receive
                found = semantics.find_match(state, pools[i])
                if found is not None:
                    pool_index, arm = found
                    item = pools[i][pool_index]
                    new_pools = _remove(pools, i, pool_index)
                    nxt = (_move(locations, i, arm.target), new_pools)
                    out.append((ConsumeStep(subject, item.message_id, item.from_subject), nxt))
                else:
                    arm = semantics.timeout_arm(state)
                    if arm is not None:
                        nxt = (_move(locations, i, arm.target), pools)
                        out.append((TimeoutStep(subject), nxt))
        return out

    def to_product_state(self, key: tuple) -> ProductState:
        locations, pools = key
        return ProductState(
            locations={s: self.programs[s].state(locations[i]).id for i, s in enumerate(self.subjects)},
            pools={s: pools[i] for i, s in enumerate(self.subjects)},
        )

    def unconsumed_at(self, key: tuple) -> list[str]:
        locations, pools = key
        return [
            s
            for i, s in enumerate(self.subjects)
            if self.programs[s].is_end(locations[i]) and pools[i]
        ]


def _move(locations: tuple, i: int, target: int) -> tuple:
    return locations[:i] + (target,) + locations[i + 1 :]


def _append(pools: tuple, j: int, item: PoolItem) -> tuple:
    return pools[:j] + (pools[j] + (item,),) + pools[j + 1 :]


def _remove(pools: tuple, i: int, pool_index: int) -> tuple:
    pool = pools[i]
    return pools[:i] + (pool[:pool_index] + pool[pool_index + 1 :],) + pools[i + 1 :]


def check_soundness(
    m: ProcessModel, pool_bound: int = 1, state_cap: int = 1_000_000
) -> SoundnessReport:
    """Breadth-first exploration; deterministic regardless of environment."""
    if any(s.external for s in m.subjects):
        return SoundnessReport(
            verdict=INCONCLUSIVE, explored=0, counterexample=None, cap_hit=False, bound=pool_bound
        )

    space = _Space(m, pool_bound)
    initial = space.initial()
    visited: set = {initial}
    parents: dict = {initial: None}
    queue: deque = deque([initial])
    warned: set[str] = set()
    cap_hit = False

    while queue:
        key = queue.popleft()
        steps = space.steps(key)
        for subject in space.unconsumed_at(key):
            warned.add(subject)
        if not steps and not space.is_final(key):
            trace = _path_to(key, parents)
            return SoundnessReport(
                verdict=UNSOUND,
                explored=len(visited),
                counterexample=trace,
                cap_hit=False,
                deadlock=space.to_product_state(key),
                warnings=_pool_warnings(warned),
                bound=pool_bound,
            )
        for step, nxt in steps:
            if nxt in visited:
                continue
            if len(visited) >= state_cap:
                cap_hit = True
                continue
            visited.add(nxt)
            parents[nxt] = (key, step)
            queue.append(nxt)

    return SoundnessReport(
        verdict=INCONCLUSIVE if cap_hit else SOUND,
        explored=len(visited),
        counterexample=None,
        cap_hit=cap_hit,
        warnings=_pool_warnings(warned),
        bound=pool_bound,
    )


def _path_to(key: tuple, parents: dict) -> tuple:
    steps = []
    while parents[key] is not None:
        key, step = parents[key]
        steps.append(step)
    return tuple(reversed(steps))


def _pool_warnings(subjects: set[str]) -> tuple:
    return tuple(
        Diagnostic(WARNING, V_SOUND_02, (f"{s}.sbd.xml", s),
                   f"subject {s!r} can halt with unconsumed messages in its pool")
        for s in sorted(subjects)
    )


def replay_counterexample(m: ProcessModel, trace, pool_bound: int = 1) -> ProductState:
    """Drive the product stepper along a trace; returns the state it lands in.

    Raises ValueError if any step is not enabled where the trace claims it is.
    """
    space = _Space(m, pool_bound)
    key = space.initial()
    for wanted in trace:
        for step, nxt in space.steps(key):
            if step == wanted:
                key = nxt
                break
        else:
            raise ValueError(f"counterexample step {wanted!r} is not enabled")
    return space.to_product_state(key)
