"""Bundle container: canonical JSON payload behind an 8-byte magic and a version.

The content hash is a SHA-256 over the canonical payload with the hash field
blanked; the stored payload then embeds the real hash. load_bundle verifies it
before returning anything.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

from sbpm.compiler.ir import (
    EmitArm,
    IrArm,
    IrState,
    MatchArm,
    OutcomeArm,
    RestartPolicy,
    SubjectProgram,
    SupervisorConfig,
    TimeoutArm,
)
from sbpm.model import BoField, BoSchema, MessageDecl

BUNDLE_MAGIC = b"SBPMBNDL"
BUNDLE_VERSION = 1
FILE_EXTENSION = ".sbpmb"


class BundleError(Exception):
    pass


class MalformedBundle(BundleError):
    pass


class CorruptBundle(BundleError):
    pass


@dataclass(frozen=True)
class Manifest:
    process_id: str
    name: str
    version: str
    created_at: str
    content_hash: str


@dataclass(frozen=True)
class Bundle:
    manifest: Manifest
    programs: tuple[SubjectProgram, ...]
    messages: tuple[MessageDecl, ...]
    bo_schemas: tuple[BoSchema, ...]
    supervisor: SupervisorConfig
    pool_capacities: tuple[tuple[str, int], ...]  # every subject, external included
    roles: tuple[tuple[str, str], ...]  # internal subjects only

    def with_hash(self, content_hash: str) -> "Bundle":
        return replace(self, manifest=replace(self.manifest, content_hash=content_hash))

    def program(self, subject_id: str) -> SubjectProgram:
        for p in self.programs:
            if p.subject == subject_id:
                return p
        raise KeyError(subject_id)

    def message(self, message_id: str) -> MessageDecl:
        for m in self.messages:
            if m.id == message_id:
                return m
        raise KeyError(message_id)

    def schema(self, schema_id: str) -> BoSchema:
        for s in self.bo_schemas:
            if s.id == schema_id:
                return s
        raise KeyError(schema_id)

    def pool_capacity(self, subject_id: str) -> int:
        for sid, cap in self.pool_capacities:
            if sid == subject_id:
                return cap
        raise KeyError(subject_id)

    def role_of(self, subject_id: str) -> str:
        for sid, role in self.roles:
            if sid == subject_id:
                return role
        raise KeyError(subject_id)

    def subject_ids(self) -> tuple[str, ...]:
        return tuple(p.subject for p in self.programs)

    def external_subject_ids(self) -> tuple[str, ...]:
        return tuple(subject for subject, _ in self.supervisor.external_routes)


def canonical_json(value) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def bundle_payload(b: Bundle) -> dict:
    return {
        "manifest": {
            "process": b.manifest.process_id,
            "name": b.manifest.name,
            "version": b.manifest.version,
            "created_at": b.manifest.created_at,
            "content_hash": b.manifest.content_hash,
        },
        "programs": [_program_payload(p) for p in b.programs],
        "messages": [
            {"id": m.id, "name": m.name, "from": m.from_subject, "to": m.to_subject, "bo": m.bo}
            for m in b.messages
        ],
        "schemas": [{"id": s.id, "fields": [_field_payload(f) for f in s.fields]} for s in b.bo_schemas],
        "supervisor": {
            "restart": {
                "kind": b.supervisor.restart_policy.kind,
                "max_restarts": b.supervisor.restart_policy.max_restarts,
                "window_s": b.supervisor.restart_policy.window_s,
            },
            "metrics": list(b.supervisor.metrics),
            "external_routes": [[subject, hint] for subject, hint in b.supervisor.external_routes],
        },
        "pools": [[subject, cap] for subject, cap in b.pool_capacities],
        "roles": [[subject, role] for subject, role in b.roles],
    }


def _program_payload(p: SubjectProgram) -> dict:
    return {
        "subject": p.subject,
        "start": p.start_index,
        "ends": sorted(p.end_indices),
        "states": [
            {
                "id": s.id,
                "name": s.name,
                "kind": s.kind,
                "refinement": s.refinement,
                "on_error": s.on_error,
                "timeout_ms": s.timeout_ms,
                "arms": [_arm_payload(a) for a in s.arms],
            }
            for s in p.states
        ],
    }


def _arm_payload(arm: IrArm) -> dict:
    if isinstance(arm, OutcomeArm):
        return {"type": "outcome", "outcome": arm.outcome, "target": arm.target}
    if isinstance(arm, EmitArm):
        return {"type": "emit", "message": arm.message, "to": arm.to_subject, "bo": arm.bo, "target": arm.target}
    if isinstance(arm, MatchArm):
        return {"type": "match", "message": arm.message, "from": arm.from_subject, "target": arm.target}
    return {"type": "timeout", "target": arm.target}


def compute_content_hash(b: Bundle) -> str:
    payload = bundle_payload(b.with_hash(""))
    return hashlib.sha256(canonical_json(payload)).hexdigest()


def bundle_to_bytes(b: Bundle) -> bytes:
    return BUNDLE_MAGIC + struct.pack(">H", BUNDLE_VERSION) + canonical_json(bundle_payload(b))


def bundle_from_bytes(data: bytes) -> Bundle:
    if len(data) < len(BUNDLE_MAGIC) + 2 or data[: len(BUNDLE_MAGIC)] != BUNDLE_MAGIC:
        raise MalformedBundle("missing bundle magic")
    (version,) = struct.unpack(">H", data[len(BUNDLE_MAGIC) : len(BUNDLE_MAGIC) + 2])
    if version != BUNDLE_VERSION:
        raise MalformedBundle(f"unsupported bundle version {version}")
    try:
        payload = json.loads(data[len(BUNDLE_MAGIC) + 2 :].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedBundle(f"bad payload: {exc}") from exc
    try:
        bundle = bundle_from_payload(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedBundle(f"incomplete payload: {exc}") from exc
    expected = compute_content_hash(bundle)
    if bundle.manifest.content_hash != expected:
        raise CorruptBundle(
            f"content hash mismatch: manifest says {bundle.manifest.content_hash[:12]}..., "
            f"payload hashes to {expected[:12]}..."
        )
    return bundle


def bundle_from_payload(payload: dict) -> Bundle:
    man = payload["manifest"]
    programs = tuple(_program_from_payload(p) for p in payload["programs"])
    messages = tuple(
        MessageDecl(id=m["id"], name=m["name"], from_subject=m["from"], to_subject=m["to"], bo=m.get("bo"))
        for m in payload["messages"]
    )
    schemas = tuple(
        BoSchema(id=s["id"], fields=tuple(_field_from_payload(f) for f in s["fields"]))
        for s in payload["schemas"]
    )
    sup = payload["supervisor"]
    supervisor = SupervisorConfig(
        restart_policy=RestartPolicy(
            kind=sup["restart"]["kind"],
            max_restarts=sup["restart"]["max_restarts"],
            window_s=sup["restart"]["window_s"],
        ),
        metrics=tuple(sup["metrics"]),
        external_routes=tuple((r[0], r[1]) for r in sup["external_routes"]),
    )
    return Bundle(
        manifest=Manifest(
            process_id=man["process"],
            name=man["name"],
            version=man["version"],
            created_at=man["created_at"],
            content_hash=man["content_hash"],
        ),
        programs=programs,
        messages=messages,
        bo_schemas=schemas,
        supervisor=supervisor,
        pool_capacities=tuple((p[0], p[1]) for p in payload["pools"]),
        roles=tuple((r[0], r[1]) for r in payload["roles"]),
    )


def _program_from_payload(p: dict) -> SubjectProgram:
    states = []
    for s in p["states"]:
        arms: list[IrArm] = []
        for a in s["arms"]:
            if a["type"] == "outcome":
                arms.append(OutcomeArm(outcome=a["outcome"], target=a["target"]))
            elif a["type"] == "emit":
                arms.append(EmitArm(message=a["message"], to_subject=a["to"], bo=a.get("bo"), target=a["target"]))
            elif a["type"] == "match":
                arms.append(MatchArm(message=a["message"], from_subject=a["from"], target=a["target"]))
            elif a["type"] == "timeout":
                arms.append(TimeoutArm(target=a["target"]))
            else:
                raise ValueError(f"unknown arm type {a['type']!r}")
        states.append(
            IrState(
                id=s["id"],
                name=s["name"],
                kind=s["kind"],
                arms=tuple(arms),
                refinement=s.get("refinement"),
                on_error=s.get("on_error"),
                timeout_ms=s.get("timeout_ms"),
            )
        )
    return SubjectProgram(
        subject=p["subject"],
        states=tuple(states),
        start_index=p["start"],
        end_indices=frozenset(p["ends"]),
    )


def _field_payload(f: BoField) -> dict:
    return {
        "name": f.name,
        "type": f.type,
        "required": f.required,
        "children": [_field_payload(c) for c in f.children],
    }


def _field_from_payload(f: dict) -> BoField:
    return BoField(
        name=f["name"],
        type=f["type"],
        required=f["required"],
        children=tuple(_field_from_payload(c) for c in f.get("children", ())),
    )


def store_bundle(b: Bundle, path: "Path | str") -> None:
    Path(path).write_bytes(bundle_to_bytes(b))


def load_bundle(path: "Path | str") -> Bundle:
    p = Path(path)
    if not p.is_file():
        raise MalformedBundle(f"no such bundle file: {p}")
    return bundle_from_bytes(p.read_bytes())
