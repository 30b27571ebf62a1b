"""Domain types for subject-interaction process models and their XML file set."""

from sbpm.model.errors import (
    DanglingReference,
    MalformedXml,
    MissingFile,
    ParseError,
    SchemaViolation,
)
from sbpm.model.parser import parse_model
from sbpm.model.payload import PayloadError, validate_payload
from sbpm.model.serializer import serialize_model
from sbpm.model.types import (
    IDENT_RE,
    TIMEOUT_LABEL,
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

__all__ = [
    "IDENT_RE",
    "TIMEOUT_LABEL",
    "BehaviorGraph",
    "BoField",
    "BoSchema",
    "DanglingReference",
    "FunctionLabel",
    "MalformedXml",
    "MessageDecl",
    "MissingFile",
    "ParseError",
    "PayloadError",
    "ProcessModel",
    "ReceiveLabel",
    "SchemaViolation",
    "SendLabel",
    "State",
    "SubjectDecl",
    "TimeoutLabel",
    "Transition",
    "is_ident",
    "parse_model",
    "serialize_model",
    "validate_payload",
]
