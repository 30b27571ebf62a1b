"""Engine management layer: repository, instances, worklist, nodes, HTTP API."""

from sbpm.engine.errors import (
    BadServiceResponse,
    EngineError,
    NotYourTask,
    ServiceUnreachable,
    TaskGone,
    UnknownBundle,
    UnknownInstance,
)
from sbpm.engine.http_api import EngineServer
from sbpm.engine.repository import BundleRepository
from sbpm.engine.service import EngineConfig, EngineNode, NodeInfo, Task, is_service_binding

__all__ = [
    "BadServiceResponse",
    "BundleRepository",
    "EngineConfig",
    "EngineError",
    "EngineNode",
    "EngineServer",
    "NodeInfo",
    "NotYourTask",
    "ServiceUnreachable",
    "Task",
    "TaskGone",
    "UnknownBundle",
    "UnknownInstance",
    "is_service_binding",
]
