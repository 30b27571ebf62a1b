"""Parse errors. Every failure names its location so tooling can point at it."""

from __future__ import annotations


class ParseError(Exception):
    """Base class for model ingestion failures."""

    def __init__(self, message: str, *, file: str = "") -> None:
        super().__init__(message)
        self.file = file

    def __str__(self) -> str:
        base = super().__str__()
        return f"{self.file}: {base}" if self.file else base


class MissingFile(ParseError):
    def __init__(self, filename: str) -> None:
        super().__init__(f"required file {filename!r} is missing", file=filename)
        self.filename = filename


class MalformedXml(ParseError):
    def __init__(self, file: str, line: int, column: int, detail: str) -> None:
        super().__init__(f"malformed XML at line {line}, column {column}: {detail}", file=file)
        self.line = line
        self.column = column


class SchemaViolation(ParseError):
    """Well-formed XML that breaks the document schema or a model invariant."""

    def __init__(self, file: str, element: str, detail: str, attribute: str | None = None) -> None:
        where = f"<{element}>" + (f" @{attribute}" if attribute else "")
        super().__init__(f"{where}: {detail}", file=file)
        self.element = element
        self.attribute = attribute


class DanglingReference(ParseError):
    def __init__(self, file: str, ref: str, detail: str) -> None:
        super().__init__(f"reference to undeclared id {ref!r}: {detail}", file=file)
        self.ref = ref
