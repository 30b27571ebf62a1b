"""Independent brute-force soundness enumerator.

Deliberately written against the raw BehaviorGraph types with its own state
encoding and its own matching loop; it never imports the production explorer,
the IR, or the shared semantics helpers. Used to cross-check verdicts.
"""

from __future__ import annotations

from sbpm.model import FunctionLabel, ProcessModel, ReceiveLabel, SendLabel, TimeoutLabel


def oracle_soundness(m: ProcessModel, pool_bound: int = 1, state_cap: int = 200_000):
    """Returns (verdict, deadlock_state_or_None). Verdict in {sound, unsound, inconclusive}."""
    subjects = sorted(s.id for s in m.subjects if not s.external)
    graphs = {s: m.behaviors[s] for s in subjects}
    bound = {s.id: min(s.pool_capacity, pool_bound) for s in m.subjects if not s.external}
    ends = {s: {st.id for st in graphs[s].states if st.end} for s in subjects}
    starts = {s: next(st.id for st in graphs[s].states if st.start) for s in subjects}
    arms = {s: {st.id: [t for t in graphs[s].transitions if t.from_state == st.id] for st in graphs[s].states}
            for s in subjects}

    def successors(state):
        locs, pools = state
        moves = []
        for i, subj in enumerate(subjects):
            here = locs[i]
            if here in ends[subj]:
                continue
            outgoing = arms[subj][here]
            kind = graphs[subj].state_by_id(here).kind
            if kind == "function":
                for t in outgoing:
                    if isinstance(t.label, FunctionLabel):
                        moves.append((locs[:i] + (t.to_state,) + locs[i + 1:], pools))
            elif kind == "send":
                for t in outgoing:
                    if not isinstance(t.label, SendLabel):
                        continue
                    j = subjects.index(t.label.to_subject)
                    if len(pools[j]) >= bound[t.label.to_subject]:
                        continue
                    new_pool = pools[j] + ((t.label.message, subj),)
                    new_pools = pools[:j] + (new_pool,) + pools[j + 1:]
                    moves.append((locs[:i] + (t.to_state,) + locs[i + 1:], new_pools))
            else:
                receive_arms = [t for t in outgoing if isinstance(t.label, ReceiveLabel)]
                chosen = None
                for pos, (msg, frm) in enumerate(pools[i]):
                    for t in receive_arms:
                        if t.label.message == msg and t.label.from_subject == frm:
                            chosen = (pos, t)
                            break
                    if chosen:
                        break
                if chosen:
                    pos, t = chosen
                    new_pool = pools[i][:pos] + pools[i][pos + 1:]
                    new_pools = pools[:i] + (new_pool,) + pools[i + 1:]
                    moves.append((locs[:i] + (t.to_state,) + locs[i + 1:], new_pools))
                else:
                    for t in outgoing:
                        if isinstance(t.label, TimeoutLabel):
                            moves.append((locs[:i] + (t.to_state,) + locs[i + 1:], pools))
        return moves

    def all_done(state):
        locs, _ = state
        return all(locs[i] in ends[s] for i, s in enumerate(subjects))

    initial = (tuple(starts[s] for s in subjects), tuple(() for _ in subjects))
    stack = [initial]
    seen = {initial}
    while stack:
        state = stack.pop()
        nxt = successors(state)
        if not nxt and not all_done(state):
            return "unsound", state
        for n in nxt:
            if n not in seen:
                if len(seen) >= state_cap:
                    return "inconclusive", None
                seen.add(n)
                stack.append(n)
    return "sound", None
