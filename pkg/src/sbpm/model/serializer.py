"""Byte-deterministic XML serialization: fixed attribute order, LF endings, UTF-8.

parse_model(serialize_model(m)) is structurally equal to m for every valid model.
"""

from __future__ import annotations

from sbpm.model.types import (
    BoField,
    BoSchema,
    FunctionLabel,
    ProcessModel,
    ReceiveLabel,
    SendLabel,
    State,
    TimeoutLabel,
    Transition,
)

# XML 1.0 cannot carry C0 controls; tab/newline/CR survive only as character
# references inside attribute values (literal ones get normalized to spaces).
_ESCAPES = {
    "&": "&amp;",
    "<": "&lt;",
    ">": "&gt;",
    '"': "&quot;",
    "\t": "&#9;",
    "\n": "&#10;",
    "\r": "&#13;",
}


def _attr(value: str) -> str:
    out: list[str] = []
    for ch in value:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            raise ValueError(f"text contains unrepresentable control character {ch!r}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def serialize_model(m: ProcessModel) -> dict[str, bytes]:
    """Render the model as its canonical file map (sid.xml + one SBD per behavior)."""
    files = {"sid.xml": _render_sid(m)}
    for subject_id in sorted(m.behaviors):
        files[f"{subject_id}.sbd.xml"] = _render_sbd(m.behaviors[subject_id])
    return files


def _render_sid(m: ProcessModel) -> bytes:
    lines = [f"<process id={_attr(m.id)} name={_attr(m.name)} version={_attr(m.version)}>"]
    for s in m.subjects:
        parts = [f"subject id={_attr(s.id)} name={_attr(s.name)} role={_attr(s.role)}"]
        parts.append(f'external={_attr("true" if s.external else "false")}')
        parts.append(f"pool={_attr(str(s.pool_capacity))}")
        lines.append("  <" + " ".join(parts) + "/>")
    for msg in m.messages:
        parts = [
            f"message id={_attr(msg.id)} name={_attr(msg.name)}",
            f"from={_attr(msg.from_subject)} to={_attr(msg.to_subject)}",
        ]
        if msg.bo is not None:
            parts.append(f"bo={_attr(msg.bo)}")
        lines.append("  <" + " ".join(parts) + "/>")
    for schema in m.bo_schemas:
        lines.extend(_render_schema(schema))
    lines.append("</process>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _render_schema(schema: BoSchema) -> list[str]:
    lines = [f"  <businessObject id={_attr(schema.id)}>"]
    for f in schema.fields:
        lines.extend(_render_field(f, indent=2))
    lines.append("  </businessObject>")
    return lines


def _render_field(f: BoField, indent: int) -> list[str]:
    pad = "  " * indent
    head = (
        f"{pad}<field name={_attr(f.name)} type={_attr(f.type)} "
        f"required={_attr('true' if f.required else 'false')}"
    )
    if not f.children:
        return [head + "/>"]
    lines = [head + ">"]
    for child in f.children:
        lines.extend(_render_field(child, indent + 1))
    lines.append(f"{pad}</field>")
    return lines


def _render_sbd(graph) -> bytes:
    lines = [f"<behavior subject={_attr(graph.subject)}>"]
    for s in graph.states:
        lines.append("  " + _render_state(s))
    for t in graph.transitions:
        lines.append("  " + _render_transition(t))
    lines.append("</behavior>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _render_state(s: State) -> str:
    parts = [f"state id={_attr(s.id)} name={_attr(s.name)} kind={_attr(s.kind)}"]
    if s.start:
        parts.append('start="true"')
    if s.end:
        parts.append('end="true"')
    if s.refinement is not None:
        parts.append(f"refinement={_attr(s.refinement)}")
    if s.on_error is not None:
        parts.append(f"on-error={_attr(s.on_error)}")
    if s.timeout_ms is not None:
        parts.append(f"timeout={_attr(str(s.timeout_ms))}")
    return "<" + " ".join(parts) + "/>"


def _render_transition(t: Transition) -> str:
    parts = [f"transition from={_attr(t.from_state)} to={_attr(t.to_state)}"]
    label = t.label
    if isinstance(label, FunctionLabel):
        parts.append(f"outcome={_attr(label.outcome)}")
    elif isinstance(label, SendLabel):
        parts.append(f"message={_attr(label.message)} to-subject={_attr(label.to_subject)}")
    elif isinstance(label, ReceiveLabel):
        parts.append(f"message={_attr(label.message)} from-subject={_attr(label.from_subject)}")
    elif isinstance(label, TimeoutLabel):
        parts.append('timeout="true"')
    return "<" + " ".join(parts) + "/>"
