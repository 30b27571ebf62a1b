from __future__ import annotations


class RuntimeFault(Exception):
    """Base class for runtime-layer errors."""


class NoSuchOutcome(RuntimeFault):
    def __init__(self, subject: str, state: str, outcome: str) -> None:
        super().__init__(f"{subject}/{state}: outcome {outcome!r} is not declared")
        self.outcome = outcome


class PayloadInvalid(RuntimeFault):
    def __init__(self, detail: str) -> None:
        super().__init__(f"payload rejected: {detail}")


class UnknownTarget(RuntimeFault):
    def __init__(self, subject: str, detail: str = "") -> None:
        super().__init__(f"cannot route to {subject!r}" + (f": {detail}" if detail else ""))
        self.subject = subject


class UnboundRole(RuntimeFault):
    def __init__(self, role: str) -> None:
        super().__init__(f"role {role!r} has no agent binding")
        self.role = role


class UnknownNode(RuntimeFault):
    def __init__(self, node_id: str) -> None:
        super().__init__(f"node {node_id!r} is not registered")
        self.node_id = node_id


class LogCorrupt(RuntimeFault):
    pass


class BundleMismatch(RuntimeFault):
    def __init__(self, expected: str, got: str) -> None:
        super().__init__(f"log was written by bundle {expected[:12]}..., got {got[:12]}...")


class PoolOverflow(RuntimeFault):
    def __init__(self, subject: str) -> None:
        super().__init__(f"input pool of {subject!r} overflowed in drop-error mode")
        self.subject = subject


class InstanceNotRunning(RuntimeFault):
    pass
