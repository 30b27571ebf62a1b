"""Human-readable bundle listing, one block per subject, one line per arm."""

from __future__ import annotations

from sbpm.compiler.bundle import Bundle, CorruptBundle, compute_content_hash
from sbpm.compiler.ir import EmitArm, MatchArm, OutcomeArm, SubjectProgram


def disassemble(b: Bundle) -> str:
    expected = compute_content_hash(b)
    if b.manifest.content_hash != expected:
        raise CorruptBundle("bundle content hash does not match its payload")

    lines = [
        f"bundle {b.manifest.process_id} v{b.manifest.version} "
        f"({len(b.programs)} subjects, {len(b.messages)} messages, hash {b.manifest.content_hash[:12]})"
    ]
    for program in b.programs:
        lines.append("")
        lines.append(_program_header(program))
        for state in program.states:
            flags = []
            if state.refinement:
                flags.append(f"refinement={state.refinement}")
            if state.timeout_ms:
                flags.append(f"timeout={state.timeout_ms}ms")
            suffix = f"  [{', '.join(flags)}]" if flags else ""
            lines.append(f"  {state.id} ({state.kind}: {state.name}){suffix}")
            for arm in state.arms:
                lines.append("    " + _arm_line(program, state.id, arm))
    return "\n".join(lines) + "\n"


def _program_header(p: SubjectProgram) -> str:
    ends = ", ".join(p.states[i].id for i in sorted(p.end_indices))
    return f"subject {p.subject} (start={p.states[p.start_index].id}, end={{{ends}}})"


def _arm_line(p: SubjectProgram, state_id: str, arm) -> str:
    target = p.states[arm.target].id
    if isinstance(arm, OutcomeArm):
        return f"{state_id} function: {arm.outcome} -> {target}"
    if isinstance(arm, EmitArm):
        return f"{state_id} send: {arm.message} to {arm.to_subject} -> {target}"
    if isinstance(arm, MatchArm):
        return f"{state_id} receive: {arm.message} from {arm.from_subject} -> {target}"
    return f"{state_id} receive: timeout -> {target}"
