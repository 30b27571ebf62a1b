from __future__ import annotations


class EngineError(Exception):
    pass


class UnknownBundle(EngineError):
    def __init__(self, bundle_hash: str) -> None:
        super().__init__(f"no bundle deployed under hash {bundle_hash[:16]}...")
        self.bundle_hash = bundle_hash


class UnknownInstance(EngineError):
    def __init__(self, instance_id: str) -> None:
        super().__init__(f"no instance {instance_id!r}")
        self.instance_id = instance_id


class TaskGone(EngineError):
    def __init__(self, task_id: str) -> None:
        super().__init__(f"task {task_id!r} is not open")
        self.task_id = task_id


class NotYourTask(EngineError):
    def __init__(self, task_id: str, agent_id: str) -> None:
        super().__init__(f"task {task_id!r} is not assigned to agent {agent_id!r}")


class ServiceUnreachable(EngineError):
    pass


class BadServiceResponse(EngineError):
    pass
