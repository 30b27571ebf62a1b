"""Business-object payload validation against a BoSchema.

Payloads are plain JSON-shaped dicts. A message without a schema carries an
empty payload; schema'd payloads are validated strictly (unknown keys rejected,
required fields must be present and non-null).
"""

from __future__ import annotations

from typing import Any, Sequence

from sbpm.model.types import BoField, BoSchema


class PayloadError(ValueError):
    """Raised when a payload does not conform to the message's business object."""

    def __init__(self, path: str, detail: str) -> None:
        super().__init__(f"{path or '$'}: {detail}")
        self.path = path
        self.detail = detail


def validate_payload(schema: BoSchema | None, payload: Any) -> dict:
    """Return the payload as a dict, raising PayloadError on any schema violation."""
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        raise PayloadError("", f"payload must be an object, got {type(payload).__name__}")
    if schema is None:
        if payload:
            raise PayloadError("", "message carries no business object; payload must be empty")
        return {}
    _validate_fields(schema.fields, payload, path="")
    return payload


def _validate_fields(fields: Sequence[BoField], value: dict, path: str) -> None:
    known = {f.name for f in fields}
    for key in value:
        if key not in known:
            raise PayloadError(_join(path, key), "unknown field")
    for f in fields:
        present = f.name in value and value[f.name] is not None
        if f.required and not present:
            raise PayloadError(_join(path, f.name), "required field missing")
        if present:
            _validate_value(f, value[f.name], _join(path, f.name))


def _validate_value(field: BoField, value: Any, path: str) -> None:
    if field.type == "string":
        if not isinstance(value, str):
            raise PayloadError(path, f"expected string, got {type(value).__name__}")
    elif field.type == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise PayloadError(path, f"expected number, got {type(value).__name__}")
    elif field.type == "boolean":
        if not isinstance(value, bool):
            raise PayloadError(path, f"expected boolean, got {type(value).__name__}")
    elif field.type == "record":
        if not isinstance(value, dict):
            raise PayloadError(path, f"expected object, got {type(value).__name__}")
        _validate_fields(field.children, value, path)
    elif field.type == "list":
        if not isinstance(value, list):
            raise PayloadError(path, f"expected list, got {type(value).__name__}")
        for i, item in enumerate(value):
            item_path = f"{path}[{i}]"
            if not isinstance(item, dict):
                raise PayloadError(item_path, f"expected object, got {type(item).__name__}")
            _validate_fields(field.children, item, item_path)
    else:  # unreachable for parsed models
        raise PayloadError(path, f"unknown field type {field.type!r}")


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key
