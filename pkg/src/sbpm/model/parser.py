"""Multi-file XML ingestion: one sid.xml plus one <subject>.sbd.xml per internal subject.

The parser is total: any byte input yields either a ProcessModel that satisfies
every type invariant or a ParseError naming the offending file and location.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Mapping

from sbpm.model.errors import DanglingReference, MalformedXml, MissingFile, SchemaViolation
from sbpm.model.types import (
    FIELD_TYPES,
    STATE_KINDS,
    BehaviorGraph,
    BoField,
    BoSchema,
    FunctionLabel,
    MessageDecl,
    ProcessModel,
    ReceiveLabel,
    SendLabel,
    State,
    SubjectDecl,
    TimeoutLabel,
    Transition,
    is_ident,
)

SID_FILE = "sid.xml"
SBD_SUFFIX = ".sbd.xml"

FileMap = Mapping[str, "bytes | str"]


def parse_model(source: "Path | str | FileMap") -> ProcessModel:
    """Parse a model directory (or in-memory file map) into a ProcessModel."""
    files = _load_files(source)
    if SID_FILE not in files:
        raise MissingFile(SID_FILE)

    sid = _SidParser(SID_FILE, files[SID_FILE]).parse()

    behaviors: dict[str, BehaviorGraph] = {}
    internal = [s for s in sid.subjects if not s.external]
    for subj in internal:
        fname = subj.id + SBD_SUFFIX
        if fname not in files:
            raise MissingFile(fname)
        behaviors[subj.id] = _SbdParser(fname, files[fname], sid).parse(subj.id)

    expected = {s.id + SBD_SUFFIX for s in internal} | {SID_FILE}
    for fname in files:
        if fname not in expected and (fname == SID_FILE or fname.endswith(SBD_SUFFIX)):
            raise SchemaViolation(fname, "behavior", "file does not match any declared internal subject")

    return ProcessModel(
        id=sid.id,
        name=sid.name,
        version=sid.version,
        subjects=sid.subjects,
        messages=sid.messages,
        bo_schemas=sid.bo_schemas,
        behaviors=behaviors,
    )


def _load_files(source: "Path | str | FileMap") -> dict[str, bytes]:
    if isinstance(source, Mapping):
        out: dict[str, bytes] = {}
        for name, data in source.items():
            out[name] = data.encode("utf-8") if isinstance(data, str) else bytes(data)
        return out
    root = Path(source)
    if not root.is_dir():
        raise MissingFile(str(root))
    files: dict[str, bytes] = {}
    for p in root.iterdir():
        if p.is_file() and (p.name == SID_FILE or p.name.endswith(SBD_SUFFIX)):
            files[p.name] = p.read_bytes()
    return files


def _parse_root(file: str, data: bytes, expected_tag: str) -> ET.Element:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = getattr(exc, "position", (0, 0))
        raise MalformedXml(file, line, column, exc.msg if hasattr(exc, "msg") else str(exc)) from exc
    except ValueError as exc:
        # ElementTree raises bare ValueError for some encoding declarations.
        raise MalformedXml(file, 0, 0, str(exc)) from exc
    if root.tag != expected_tag:
        raise SchemaViolation(file, root.tag, f"expected root element <{expected_tag}>")
    return root


class _AttrReader:
    """Attribute access with schema errors instead of KeyErrors."""

    def __init__(self, file: str, elem: ET.Element):
        self.file = file
        self.elem = elem
        self.seen: set[str] = set()

    def required(self, name: str) -> str:
        self.seen.add(name)
        value = self.elem.get(name)
        if value is None:
            raise SchemaViolation(self.file, self.elem.tag, "required attribute missing", attribute=name)
        return value

    def optional(self, name: str, default: str | None = None) -> str | None:
        self.seen.add(name)
        value = self.elem.get(name)
        return default if value is None else value

    def ident(self, name: str) -> str:
        value = self.required(name)
        if not is_ident(value):
            raise SchemaViolation(
                self.file, self.elem.tag, f"{value!r} is not a valid identifier", attribute=name
            )
        return value

    def boolean(self, name: str, default: bool = False) -> bool:
        raw = self.optional(name)
        if raw is None:
            return default
        if raw not in ("true", "false"):
            raise SchemaViolation(self.file, self.elem.tag, f"expected true/false, got {raw!r}", attribute=name)
        return raw == "true"

    def integer(self, name: str, *, minimum: int, default: int | None = None) -> int | None:
        raw = self.optional(name)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            raise SchemaViolation(self.file, self.elem.tag, f"expected integer, got {raw!r}", attribute=name)
        if value < minimum:
            raise SchemaViolation(self.file, self.elem.tag, f"must be >= {minimum}, got {value}", attribute=name)
        return value

    def reject_unknown(self) -> None:
        for key in self.elem.keys():
            if key not in self.seen:
                raise SchemaViolation(self.file, self.elem.tag, "unknown attribute", attribute=key)


class _SidParser:
    def __init__(self, file: str, data: bytes):
        self.file = file
        self.data = data

    def parse(self) -> ProcessModel:
        root = _parse_root(self.file, self.data, "process")
        attrs = _AttrReader(self.file, root)
        proc_id = attrs.ident("id")
        name = attrs.required("name")
        version = attrs.required("version")
        attrs.reject_unknown()

        subjects: list[SubjectDecl] = []
        messages: list[MessageDecl] = []
        schemas: list[BoSchema] = []
        for child in root:
            if child.tag == "subject":
                subjects.append(self._parse_subject(child))
            elif child.tag == "message":
                messages.append(self._parse_message(child))
            elif child.tag == "businessObject":
                schemas.append(self._parse_schema(child))
            else:
                raise SchemaViolation(self.file, child.tag, "unknown element in <process>")

        self._check_unique("subject", [s.id for s in subjects])
        self._check_unique("message", [m.id for m in messages])
        self._check_unique("businessObject", [s.id for s in schemas])

        subject_ids = {s.id for s in subjects}
        schema_ids = {s.id for s in schemas}
        for m in messages:
            if m.from_subject not in subject_ids:
                raise DanglingReference(self.file, m.from_subject, f"message {m.id!r} from-subject")
            if m.to_subject not in subject_ids:
                raise DanglingReference(self.file, m.to_subject, f"message {m.id!r} to-subject")
            if m.from_subject == m.to_subject:
                raise SchemaViolation(self.file, "message", f"{m.id!r} has identical from and to", attribute="to")
            if m.bo is not None and m.bo not in schema_ids:
                raise DanglingReference(self.file, m.bo, f"message {m.id!r} business object")

        return ProcessModel(
            id=proc_id,
            name=name,
            version=version,
            subjects=tuple(subjects),
            messages=tuple(messages),
            bo_schemas=tuple(schemas),
            behaviors={},
        )

    def _check_unique(self, element: str, ids: list[str]) -> None:
        seen: set[str] = set()
        for i in ids:
            if i in seen:
                raise SchemaViolation(self.file, element, f"duplicate id {i!r}", attribute="id")
            seen.add(i)

    def _parse_subject(self, elem: ET.Element) -> SubjectDecl:
        attrs = _AttrReader(self.file, elem)
        sid = attrs.ident("id")
        name = attrs.required("name")
        external = attrs.boolean("external", default=False)
        role = attrs.optional("role")
        if role is None:
            if not external:
                raise SchemaViolation(self.file, "subject", f"{sid!r} needs a role", attribute="role")
            role = ""
        pool = attrs.integer("pool", minimum=1, default=16)
        attrs.reject_unknown()
        if len(elem):
            raise SchemaViolation(self.file, "subject", "must be empty")
        assert pool is not None
        return SubjectDecl(id=sid, name=name, role=role, external=external, pool_capacity=pool)

    def _parse_message(self, elem: ET.Element) -> MessageDecl:
        attrs = _AttrReader(self.file, elem)
        mid = attrs.ident("id")
        name = attrs.required("name")
        from_subject = attrs.ident("from")
        to_subject = attrs.ident("to")
        bo = attrs.optional("bo")
        attrs.reject_unknown()
        if len(elem):
            raise SchemaViolation(self.file, "message", "must be empty")
        return MessageDecl(id=mid, name=name, from_subject=from_subject, to_subject=to_subject, bo=bo)

    def _parse_schema(self, elem: ET.Element) -> BoSchema:
        attrs = _AttrReader(self.file, elem)
        sid = attrs.ident("id")
        attrs.reject_unknown()
        return BoSchema(id=sid, fields=self._parse_fields(elem))

    def _parse_fields(self, parent: ET.Element) -> tuple[BoField, ...]:
        fields: list[BoField] = []
        names: set[str] = set()
        for child in parent:
            if child.tag != "field":
                raise SchemaViolation(self.file, child.tag, "only <field> elements allowed here")
            attrs = _AttrReader(self.file, child)
            name = attrs.required("name")
            ftype = attrs.required("type")
            required = attrs.boolean("required", default=False)
            attrs.reject_unknown()
            if ftype not in FIELD_TYPES:
                raise SchemaViolation(self.file, "field", f"unknown type {ftype!r}", attribute="type")
            if name in names:
                raise SchemaViolation(self.file, "field", f"duplicate field name {name!r}", attribute="name")
            names.add(name)
            children = self._parse_fields(child)
            if ftype in ("record", "list") and not children:
                raise SchemaViolation(self.file, "field", f"{name!r}: {ftype} needs at least one child field")
            if ftype not in ("record", "list") and children:
                raise SchemaViolation(self.file, "field", f"{name!r}: scalar fields cannot have children")
            fields.append(BoField(name=name, type=ftype, required=required, children=children))
        return tuple(fields)


class _SbdParser:
    def __init__(self, file: str, data: bytes, sid: ProcessModel):
        self.file = file
        self.data = data
        self.sid = sid

    def parse(self, expected_subject: str) -> BehaviorGraph:
        root = _parse_root(self.file, self.data, "behavior")
        attrs = _AttrReader(self.file, root)
        subject = attrs.ident("subject")
        attrs.reject_unknown()
        if subject != expected_subject:
            raise SchemaViolation(
                self.file, "behavior", f"declares subject {subject!r}, expected {expected_subject!r}",
                attribute="subject",
            )

        states: list[State] = []
        transitions: list[Transition] = []
        for child in root:
            if child.tag == "state":
                states.append(self._parse_state(child, had_start=any(s.start for s in states)))
            elif child.tag == "transition":
                transitions.append(self._parse_transition(child))
            else:
                raise SchemaViolation(self.file, child.tag, "unknown element in <behavior>")

        self._check_graph(subject, states, transitions)
        return BehaviorGraph(subject=subject, states=tuple(states), transitions=tuple(transitions))

    def _parse_state(self, elem: ET.Element, had_start: bool) -> State:
        attrs = _AttrReader(self.file, elem)
        sid = attrs.ident("id")
        name = attrs.required("name")
        kind = attrs.required("kind")
        start = attrs.boolean("start", default=False)
        end = attrs.boolean("end", default=False)
        refinement = attrs.optional("refinement")
        on_error = attrs.optional("on-error")
        timeout = attrs.integer("timeout", minimum=0, default=None)
        attrs.reject_unknown()
        if len(elem):
            raise SchemaViolation(self.file, "state", "must be empty")

        if kind not in STATE_KINDS:
            raise SchemaViolation(self.file, "state", f"unknown kind {kind!r}", attribute="kind")
        if start and had_start:
            raise SchemaViolation(self.file, "state", f"{sid!r}: second start state", attribute="start")
        if end and kind != "function":
            raise SchemaViolation(self.file, "state", f"{sid!r}: end states must be function states", attribute="end")
        if refinement is not None and kind != "function":
            raise SchemaViolation(
                self.file, "state", f"{sid!r}: refinement only on function states", attribute="refinement"
            )
        if on_error is not None and refinement is None:
            raise SchemaViolation(
                self.file, "state", f"{sid!r}: on-error requires a refinement", attribute="on-error"
            )
        if timeout is not None and kind != "receive":
            raise SchemaViolation(self.file, "state", f"{sid!r}: timeout only on receive states", attribute="timeout")
        # timeout="0" means no timeout
        timeout_ms = timeout if timeout else None
        return State(
            id=sid, name=name, kind=kind, start=start, end=end,
            refinement=refinement, on_error=on_error, timeout_ms=timeout_ms,
        )

    def _parse_transition(self, elem: ET.Element) -> Transition:
        attrs = _AttrReader(self.file, elem)
        from_state = attrs.ident("from")
        to_state = attrs.ident("to")
        outcome = attrs.optional("outcome")
        message = attrs.optional("message")
        to_subject = attrs.optional("to-subject")
        from_subject = attrs.optional("from-subject")
        timeout = attrs.boolean("timeout", default=False)
        attrs.reject_unknown()

        label: FunctionLabel | SendLabel | ReceiveLabel | TimeoutLabel
        if timeout:
            if outcome or message or to_subject or from_subject:
                raise SchemaViolation(self.file, "transition", "timeout transition takes no other label", attribute="timeout")
            label = TimeoutLabel()
        elif outcome is not None:
            if message or to_subject or from_subject:
                raise SchemaViolation(self.file, "transition", "outcome label excludes message attributes", attribute="outcome")
            label = FunctionLabel(outcome=outcome)
        elif message is not None and to_subject is not None:
            if from_subject is not None:
                raise SchemaViolation(self.file, "transition", "cannot mix to-subject and from-subject", attribute="from-subject")
            label = SendLabel(message=message, to_subject=to_subject)
        elif message is not None and from_subject is not None:
            label = ReceiveLabel(message=message, from_subject=from_subject)
        else:
            raise SchemaViolation(self.file, "transition", "no label: need outcome, message routing, or timeout")
        return Transition(from_state=from_state, to_state=to_state, label=label)

    def _check_graph(self, subject: str, states: list[State], transitions: list[Transition]) -> None:
        seen: set[str] = set()
        for s in states:
            if s.id in seen:
                raise SchemaViolation(self.file, "state", f"duplicate id {s.id!r}", attribute="id")
            seen.add(s.id)
        by_id = {s.id: s for s in states}

        if not any(s.start for s in states):
            raise SchemaViolation(self.file, "behavior", "no start state")
        if not any(s.end for s in states):
            raise SchemaViolation(self.file, "behavior", "no end state")

        outgoing: dict[str, list[Transition]] = {s.id: [] for s in states}
        for t in transitions:
            if t.from_state not in by_id:
                raise DanglingReference(self.file, t.from_state, "transition source")
            if t.to_state not in by_id:
                raise DanglingReference(self.file, t.to_state, "transition target")
            outgoing[t.from_state].append(t)

        for s in states:
            outs = outgoing[s.id]
            if s.end and outs:
                raise SchemaViolation(self.file, "state", f"end state {s.id!r} has outgoing transitions", attribute="end")
            if not s.end and not outs:
                raise SchemaViolation(self.file, "state", f"non-end state {s.id!r} has no outgoing transition")
            self._check_labels(subject, s, outs)

    def _check_labels(self, subject: str, state: State, outs: list[Transition]) -> None:
        outcomes: set[str] = set()
        timeout_arms = 0
        for t in outs:
            label = t.label
            if isinstance(label, FunctionLabel):
                if state.kind != "function":
                    raise SchemaViolation(self.file, "transition", f"outcome label on {state.kind} state {state.id!r}", attribute="outcome")
                if label.outcome in outcomes:
                    raise SchemaViolation(self.file, "transition", f"duplicate outcome {label.outcome!r} on {state.id!r}", attribute="outcome")
                outcomes.add(label.outcome)
            elif isinstance(label, SendLabel):
                if state.kind != "send":
                    raise SchemaViolation(self.file, "transition", f"send label on {state.kind} state {state.id!r}", attribute="message")
                decl = self._message_decl(label.message)
                if decl.from_subject != subject or decl.to_subject != label.to_subject:
                    raise SchemaViolation(
                        self.file, "transition",
                        f"message {label.message!r} is declared {decl.from_subject}->{decl.to_subject}, "
                        f"not {subject}->{label.to_subject}",
                        attribute="message",
                    )
            elif isinstance(label, ReceiveLabel):
                if state.kind != "receive":
                    raise SchemaViolation(self.file, "transition", f"receive label on {state.kind} state {state.id!r}", attribute="message")
                decl = self._message_decl(label.message)
                if decl.to_subject != subject or decl.from_subject != label.from_subject:
                    raise SchemaViolation(
                        self.file, "transition",
                        f"message {label.message!r} is declared {decl.from_subject}->{decl.to_subject}, "
                        f"not {label.from_subject}->{subject}",
                        attribute="message",
                    )
            else:
                if state.kind != "receive":
                    raise SchemaViolation(self.file, "transition", f"timeout label on {state.kind} state {state.id!r}", attribute="timeout")
                timeout_arms += 1
                if timeout_arms > 1:
                    raise SchemaViolation(self.file, "transition", f"second timeout transition on {state.id!r}", attribute="timeout")

        if state.kind == "receive":
            # A timer without an arm would strand the actor; an arm without a timer is dead.
            if state.timeout_ms and timeout_arms == 0:
                raise SchemaViolation(self.file, "state", f"{state.id!r} has timeout but no timeout transition", attribute="timeout")
            if timeout_arms and not state.timeout_ms:
                raise SchemaViolation(self.file, "transition", f"{state.id!r} has a timeout transition but timeout=0", attribute="timeout")
            if len(outs) - timeout_arms < 1 and not state.end:
                raise SchemaViolation(self.file, "state", f"receive state {state.id!r} needs a message arm")

        refinement_outcomes = outcomes
        if state.refinement is not None and state.on_error is not None:
            if state.on_error not in refinement_outcomes:
                raise DanglingReference(self.file, state.on_error, f"on-error outcome of state {state.id!r}")

    def _message_decl(self, message_id: str) -> MessageDecl:
        try:
            return self.sid.message_by_id(message_id)
        except KeyError:
            raise DanglingReference(self.file, message_id, "transition message") from None
