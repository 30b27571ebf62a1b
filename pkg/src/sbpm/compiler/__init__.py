"""Translate validated process models into deployable bundles of FSM programs."""

from sbpm.compiler.build import compile_subject, default_supervisor_config, link_bundle
from sbpm.compiler.bundle import (
    BUNDLE_MAGIC,
    Bundle,
    BundleError,
    CorruptBundle,
    MalformedBundle,
    Manifest,
    bundle_from_payload,
    bundle_payload,
    bundle_to_bytes,
    load_bundle,
    store_bundle,
)
from sbpm.compiler.disasm import disassemble
from sbpm.compiler.errors import CompileError, ExternalSubjectHasNoBehavior, UnknownSubject
from sbpm.compiler.ir import (
    EmitArm,
    IrState,
    MatchArm,
    OutcomeArm,
    RestartPolicy,
    SubjectProgram,
    SupervisorConfig,
    TimeoutArm,
)

__all__ = [
    "BUNDLE_MAGIC",
    "Bundle",
    "BundleError",
    "CompileError",
    "CorruptBundle",
    "EmitArm",
    "ExternalSubjectHasNoBehavior",
    "IrState",
    "MalformedBundle",
    "Manifest",
    "MatchArm",
    "OutcomeArm",
    "RestartPolicy",
    "SubjectProgram",
    "SupervisorConfig",
    "TimeoutArm",
    "UnknownSubject",
    "bundle_from_payload",
    "bundle_payload",
    "bundle_to_bytes",
    "compile_subject",
    "default_supervisor_config",
    "disassemble",
    "link_bundle",
    "load_bundle",
    "store_bundle",
]
