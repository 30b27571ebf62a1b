"""Static semantic checks over a parsed (or programmatically built) model.

The parser already rejects these defects in file input; re-checking here is
the hardening layer for models constructed in memory, plus the reachability
analysis the parser does not attempt.
"""

from __future__ import annotations

from sbpm.model import FunctionLabel, ProcessModel, ReceiveLabel, SendLabel
from sbpm.validate.diagnostics import (
    ERROR,
    V_IFACE_01,
    V_IFACE_02,
    V_IFACE_03,
    V_IFACE_04,
    V_STRUCT_01,
    V_STRUCT_02,
    V_STRUCT_03,
    V_STRUCT_04,
    WARNING,
    Diagnostic,
)


def check_structure(m: ProcessModel) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for subject_id in sorted(m.behaviors):
        graph = m.behaviors[subject_id]
        file = f"{subject_id}.sbd.xml"
        succ: dict[str, list[str]] = {s.id: [] for s in graph.states}
        for t in graph.transitions:
            if t.from_state in succ:
                succ[t.from_state].append(t.to_state)

        reachable = _closure([graph.start_state.id] if _has_start(graph) else [], succ)
        for state in graph.states:
            if state.id not in reachable:
                out.append(Diagnostic(ERROR, V_STRUCT_01, (file, state.id),
                                      f"state {state.id!r} is unreachable from the start state"))

        end_ids = {s.id for s in graph.states if s.end}
        pred: dict[str, list[str]] = {s.id: [] for s in graph.states}
        for t in graph.transitions:
            if t.to_state in pred:
                pred[t.to_state].append(t.from_state)
        can_finish = _closure(sorted(end_ids), pred)
        for state in graph.states:
            if state.id in reachable and state.id not in can_finish:
                out.append(Diagnostic(WARNING, V_STRUCT_02, (file, state.id),
                                      f"no end state is reachable from {state.id!r}"))

        for state in graph.states:
            seen: set[str] = set()
            for t in graph.outgoing(state.id):
                if isinstance(t.label, FunctionLabel):
                    if t.label.outcome in seen:
                        out.append(Diagnostic(ERROR, V_STRUCT_03, (file, state.id),
                                              f"duplicate outcome {t.label.outcome!r} on {state.id!r}"))
                    seen.add(t.label.outcome)
            if state.end and graph.outgoing(state.id):
                out.append(Diagnostic(ERROR, V_STRUCT_04, (file, state.id),
                                      f"end state {state.id!r} has outgoing transitions"))
    return out


def check_interfaces(m: ProcessModel) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    declared = {msg.id: msg for msg in m.messages}
    sent: set[str] = set()
    received: set[str] = set()

    for subject_id in sorted(m.behaviors):
        graph = m.behaviors[subject_id]
        file = f"{subject_id}.sbd.xml"
        for t in graph.transitions:
            label = t.label
            if isinstance(label, SendLabel):
                sent.add(label.message)
                decl = declared.get(label.message)
                if decl is None or decl.from_subject != subject_id or decl.to_subject != label.to_subject:
                    out.append(Diagnostic(ERROR, V_IFACE_01, (file, t.from_state),
                                          f"send of {label.message!r} to {label.to_subject!r} contradicts the "
                                          f"declared direction"))
            elif isinstance(label, ReceiveLabel):
                received.add(label.message)
                decl = declared.get(label.message)
                if decl is None or decl.to_subject != subject_id or decl.from_subject != label.from_subject:
                    out.append(Diagnostic(ERROR, V_IFACE_02, (file, t.from_state),
                                          f"receive of {label.message!r} from {label.from_subject!r} contradicts "
                                          f"the declared direction"))

    for msg in m.messages:
        if msg.id not in sent:
            out.append(Diagnostic(WARNING, V_IFACE_03, ("sid.xml", msg.id),
                                  f"message {msg.id!r} is declared but never sent"))
    for msg in m.messages:
        if msg.id in sent and msg.id not in received and not m.subject_by_id(msg.to_subject).external:
            out.append(Diagnostic(WARNING, V_IFACE_04, ("sid.xml", msg.id),
                                  f"message {msg.id!r} is sent but no receive transition matches it"))
    return out


def _has_start(graph) -> bool:
    return any(s.start for s in graph.states)


def _closure(seeds: list[str], edges: dict[str, list[str]]) -> set[str]:
    seen = set(seeds)
    frontier = list(seeds)
    while frontier:
        node = frontier.pop()
        for nxt in edges.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen
