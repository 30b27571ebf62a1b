from __future__ import annotations

import json

import pytest

from sbpm.compiler import (
    Bundle,
    CorruptBundle,
    EmitArm,
    ExternalSubjectHasNoBehavior,
    MalformedBundle,
    MatchArm,
    OutcomeArm,
    TimeoutArm,
    UnknownSubject,
    bundle_to_bytes,
    compile_subject,
    disassemble,
    link_bundle,
    load_bundle,
    store_bundle,
)
from sbpm.model import BehaviorGraph, ProcessModel, State, SubjectDecl, parse_model, serialize_model


def test_compile_pingpong_subject_a(pingpong_model):
    p = compile_subject(pingpong_model, "A")
    assert p.subject == "A"
    assert len(p.states) == 4
    assert p.start_index == 0
    assert p.end_indices == frozenset({3})
    assert [s.id for s in p.states] == ["s0", "s1", "s2", "s3"]
    assert p.states[0].arms == (OutcomeArm(outcome="ok", target=1),)
    assert p.states[1].arms == (EmitArm(message="ping", to_subject="B", bo=None, target=2),)
    assert p.states[2].arms == (MatchArm(message="pong", from_subject="B", target=3),)
    assert p.states[3].arms == ()


def test_compile_unknown_subject(pingpong_model):
    with pytest.raises(UnknownSubject):
        compile_subject(pingpong_model, "ghost")


def test_compile_external_subject_rejected(pingpong_model):
    m = ProcessModel(
        id="x", name="x", version="1",
        subjects=pingpong_model.subjects + (SubjectDecl(id="E", name="Ext", role="", external=True),),
        messages=pingpong_model.messages,
        bo_schemas=pingpong_model.bo_schemas,
        behaviors=pingpong_model.behaviors,
    )
    with pytest.raises(ExternalSubjectHasNoBehavior):
        compile_subject(m, "E")


def test_single_state_program():
    m = ProcessModel(
        id="solo", name="Solo", version="1",
        subjects=(SubjectDecl(id="A", name="A", role="r"), SubjectDecl(id="B", name="B", role="r")),
        messages=(),
        behaviors={
            "A": BehaviorGraph("A", (State(id="only", name="noop", kind="function", start=True, end=True),), ()),
            "B": BehaviorGraph("B", (State(id="only", name="noop", kind="function", start=True, end=True),), ()),
        },
    )
    p = compile_subject(m, "A")
    assert len(p.states) == 1
    assert p.start_index == 0
    assert p.start_index in p.end_indices


def test_timeout_arm_is_last(order_model):
    p = compile_subject(order_model, "Shipment")
    t3 = p.states[p.index_of("t3")]
    assert isinstance(t3.arms[-1], TimeoutArm)
    assert all(not isinstance(a, TimeoutArm) for a in t3.arms[:-1])
    # Non-timeout arms keep document order.
    assert isinstance(t3.arms[0], MatchArm) and t3.arms[0].message == "pickup"


def test_link_deterministic(pingpong_model):
    b1 = link_bundle(pingpong_model)
    b2 = link_bundle(pingpong_model)
    assert bundle_to_bytes(b1) == bundle_to_bytes(b2)
    assert b1.manifest.content_hash == b2.manifest.content_hash
    assert len(b1.manifest.content_hash) == 64


def test_link_counts(pingpong_model):
    b = link_bundle(pingpong_model)
    assert len(b.programs) == 2
    assert len(b.messages) == 2
    assert [p.subject for p in b.programs] == ["A", "B"]


def test_hash_sensitive_to_state_name(pingpong_dir):
    original = parse_model(pingpong_dir)
    files = serialize_model(original)
    renamed = dict(files)
    renamed["A.sbd.xml"] = files["A.sbd.xml"].replace(b'name="prepare"', b'name="get ready"')
    changed = parse_model(renamed)
    assert link_bundle(original).manifest.content_hash != link_bundle(changed).manifest.content_hash


def test_disassemble_listing(pingpong_model):
    b = link_bundle(pingpong_model)
    text = disassemble(b)
    assert "s1 send: ping to B -> s2" in text
    assert "s2 receive: pong from B -> s3" in text
    assert "s0 function: ok -> s1" in text
    assert "subject A" in text and "subject B" in text


def test_disassemble_rejects_tampered_bundle(pingpong_model):
    b = link_bundle(pingpong_model)
    tampered = b.with_hash("0" * 64)
    with pytest.raises(CorruptBundle):
        disassemble(tampered)


def test_store_load_roundtrip(pingpong_model, tmp_path):
    b = link_bundle(pingpong_model)
    path = tmp_path / "pingpong.sbpmb"
    store_bundle(b, path)
    loaded = load_bundle(path)
    assert loaded == b


def test_load_truncated_bundle(pingpong_model, tmp_path):
    b = link_bundle(pingpong_model)
    path = tmp_path / "trunc.sbpmb"
    data = bundle_to_bytes(b)
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(MalformedBundle):
        load_bundle(path)


def test_load_hash_edited_bundle(pingpong_model, tmp_path):
    b = link_bundle(pingpong_model)
    raw = bundle_to_bytes(b)
    edited = raw.replace(b.manifest.content_hash.encode(), b"0" * 64)
    path = tmp_path / "edited.sbpmb"
    path.write_bytes(edited)
    with pytest.raises(CorruptBundle):
        load_bundle(path)


def test_load_payload_byte_tampered(pingpong_model, tmp_path):
    b = link_bundle(pingpong_model)
    raw = bundle_to_bytes(b)
    tampered = raw.replace(b'"Ping Pong"', b'"Ping Wrong"')
    assert tampered != raw
    path = tmp_path / "tampered.sbpmb"
    path.write_bytes(tampered)
    with pytest.raises(CorruptBundle):
        load_bundle(path)


def test_external_routes_recorded(pingpong_model):
    m = ProcessModel(
        id="pex", name="PEx", version="1",
        subjects=pingpong_model.subjects + (SubjectDecl(id="E", name="Ext", role="", external=True),),
        messages=pingpong_model.messages,
        behaviors=pingpong_model.behaviors,
    )
    b = link_bundle(m)
    assert ("E", "") in b.supervisor.external_routes
    assert b.external_subject_ids() == ("E",)


def test_stamped_bundle_differs(pingpong_model):
    fixed = link_bundle(pingpong_model)
    stamped = link_bundle(pingpong_model, created_at="2026-08-08T00:00:00Z")
    assert fixed.manifest.created_at == "1970-01-01T00:00:00Z"
    assert fixed.manifest.content_hash != stamped.manifest.content_hash


def test_bundle_payload_is_canonical(pingpong_model):
    b = link_bundle(pingpong_model)
    raw = bundle_to_bytes(b)
    payload = json.loads(raw[10:])
    assert payload["manifest"]["process"] == "pingpong"
    assert raw[:8] == b"SBPMBNDL"
    assert raw[8:10] == b"\x00\x01"
