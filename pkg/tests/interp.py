"""Reference interpreter that walks a BehaviorGraph directly.

Independent of the compiler and runtime: transition scanning happens on the
raw model types in document order, so it serves as the second route for the
compilation-preserves-semantics check.
"""

from __future__ import annotations

from sbpm.model import (
    BehaviorGraph,
    FunctionLabel,
    ProcessModel,
    ReceiveLabel,
    SendLabel,
    TimeoutLabel,
)

AWAITING_OUTCOME = "awaiting_outcome"
AWAITING_SEND_CHOICE = "awaiting_send_choice"
AWAITING_ACK = "awaiting_ack"
AWAITING_MESSAGE = "awaiting_message"
HALTED = "halted"


class GraphInterpreter:
    def __init__(self, model: ProcessModel, graph: BehaviorGraph):
        self.model = model
        self.graph = graph
        self.pool: list[tuple[str, str]] = []
        self.entered: list[str] = []
        self.status = ""
        self._pending_target: str | None = None
        self.current = graph.start_state.id
        self._enter(self.current)

    # ------------------------------------------------------------- queries

    def outcomes(self) -> list[str]:
        return [t.label.outcome for t in self.graph.outgoing(self.current)
                if isinstance(t.label, FunctionLabel)]

    def send_choices(self) -> list[str]:
        return [t.label.message for t in self.graph.outgoing(self.current)
                if isinstance(t.label, SendLabel)]

    def timer_armed(self) -> bool:
        state = self.graph.state_by_id(self.current)
        has_arm = any(isinstance(t.label, TimeoutLabel) for t in self.graph.outgoing(self.current))
        return bool(state.timeout_ms) and has_arm

    def receivable(self) -> list[tuple[str, str]]:
        """(message, from) pairs this subject may ever be offered."""
        return [
            (m.id, m.from_subject)
            for m in self.model.messages
            if m.to_subject == self.graph.subject
        ]

    # -------------------------------------------------------------- events

    def apply(self, event: tuple) -> list[str]:
        """Apply one abstract event; returns the state ids entered."""
        before = len(self.entered)
        kind = event[0]
        if kind == "outcome":
            assert self.status in (AWAITING_OUTCOME, AWAITING_SEND_CHOICE), self.status
            if self.status == AWAITING_OUTCOME:
                target = self._outcome_target(event[1])
            else:
                target = self._send_target(event[1])
                self._pending_target = target
                self.status = AWAITING_ACK
                return []
            self._enter(target)
        elif kind == "ack":
            assert self.status == AWAITING_ACK
            target = self._pending_target
            self._pending_target = None
            assert target is not None
            self._enter(target)
        elif kind == "deliver":
            self.pool.append((event[1], event[2]))
            if self.status == AWAITING_MESSAGE:
                self._try_match()
        elif kind == "timeout":
            assert self.status == AWAITING_MESSAGE and self.timer_armed()
            if self._match() is None:
                target = next(t.to_state for t in self.graph.outgoing(self.current)
                              if isinstance(t.label, TimeoutLabel))
                self._enter(target)
        else:
            raise AssertionError(f"unknown event {event!r}")
        return self.entered[before:]

    # ------------------------------------------------------------ internals

    def _outcome_target(self, outcome: str) -> str:
        for t in self.graph.outgoing(self.current):
            if isinstance(t.label, FunctionLabel) and t.label.outcome == outcome:
                return t.to_state
        raise AssertionError(f"no outcome {outcome!r} at {self.current}")

    def _send_target(self, message: str) -> str:
        for t in self.graph.outgoing(self.current):
            if isinstance(t.label, SendLabel) and t.label.message == message:
                return t.to_state
        raise AssertionError(f"no send arm {message!r} at {self.current}")

    def _match(self) -> "tuple[int, str] | None":
        arms = [t for t in self.graph.outgoing(self.current) if isinstance(t.label, ReceiveLabel)]
        for i, (msg, frm) in enumerate(self.pool):
            for t in arms:
                if t.label.message == msg and t.label.from_subject == frm:
                    return i, t.to_state
        return None

    def _try_match(self) -> None:
        found = self._match()
        if found is not None:
            i, target = found
            del self.pool[i]
            self._enter(target)

    def _enter(self, state_id: str) -> None:
        while True:
            self.current = state_id
            self.entered.append(state_id)
            state = self.graph.state_by_id(state_id)
            if state.end:
                self.status = HALTED
                return
            if state.kind == "function":
                self.status = AWAITING_OUTCOME
                return
            if state.kind == "send":
                sends = [t for t in self.graph.outgoing(state_id) if isinstance(t.label, SendLabel)]
                if len(sends) == 1 and self.model.message_by_id(sends[0].label.message).bo is None:
                    self._pending_target = sends[0].to_state
                    self.status = AWAITING_ACK
                    return
                self.status = AWAITING_SEND_CHOICE
                return
            # receive
            found = self._match()
            if found is None:
                self.status = AWAITING_MESSAGE
                return
            i, target = found
            del self.pool[i]
            state_id = target
