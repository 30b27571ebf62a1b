from __future__ import annotations


class CompileError(Exception):
    pass


class UnknownSubject(CompileError):
    def __init__(self, subject_id: str) -> None:
        super().__init__(f"no subject {subject_id!r} in model")
        self.subject_id = subject_id


class ExternalSubjectHasNoBehavior(CompileError):
    def __init__(self, subject_id: str) -> None:
        super().__init__(f"subject {subject_id!r} is external and has no behavior to compile")
        self.subject_id = subject_id
