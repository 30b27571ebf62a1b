"""Execution runtime: supervised actors, bounded pools, event-sourced replay,
and the framed wire protocol between node dispatchers."""

from sbpm.runtime.actor import (
    AWAITING_MESSAGE,
    AWAITING_TASK,
    BLOCKED_SEND,
    CRASHED,
    HALTED,
    RUNNING,
    ActorState,
    MessageAvailable,
    SendAck,
    SendNack,
    TaskCompleted,
    TaskNeeded,
    TimeoutElapsed,
    actor_start,
    actor_step,
    bare_actor,
)
from sbpm.runtime.envelope import Envelope, make_envelope
from sbpm.runtime.errors import (
    BundleMismatch,
    InstanceNotRunning,
    LogCorrupt,
    NoSuchOutcome,
    PayloadInvalid,
    PoolOverflow,
    RuntimeFault,
    UnboundRole,
    UnknownNode,
    UnknownTarget,
)
from sbpm.runtime.events import EventLog, EventRecord, read_log
from sbpm.runtime.instance import (
    DELIVERED,
    NACK_FULL,
    ON_FULL_BLOCK,
    ON_FULL_DROP_ERROR,
    ROUTED_EXTERNAL,
    ROUTED_REMOTE,
    InstanceShard,
    InstanceSink,
    resume_instance,
    start_instance,
)
from sbpm.runtime.metrics import compute_metrics
from sbpm.runtime.replay import (
    STATUS_COMPLETED,
    STATUS_FAILED,
    STATUS_RUNNING,
    InstanceView,
    checkpoint_replay,
    replay_records,
)
from sbpm.runtime.wire import (
    MAX_FRAME_BYTES,
    BadJson,
    FrameTooLarge,
    UnsupportedVersion,
    WireFrame,
    decode_frame,
    encode_frame,
)

__all__ = [
    "AWAITING_MESSAGE",
    "AWAITING_TASK",
    "BLOCKED_SEND",
    "CRASHED",
    "DELIVERED",
    "HALTED",
    "MAX_FRAME_BYTES",
    "NACK_FULL",
    "ON_FULL_BLOCK",
    "ON_FULL_DROP_ERROR",
    "ROUTED_EXTERNAL",
    "ROUTED_REMOTE",
    "RUNNING",
    "STATUS_COMPLETED",
    "STATUS_FAILED",
    "STATUS_RUNNING",
    "ActorState",
    "BadJson",
    "BundleMismatch",
    "Envelope",
    "EventLog",
    "EventRecord",
    "FrameTooLarge",
    "InstanceNotRunning",
    "InstanceShard",
    "InstanceSink",
    "InstanceView",
    "LogCorrupt",
    "MessageAvailable",
    "NoSuchOutcome",
    "PayloadInvalid",
    "PoolOverflow",
    "RuntimeFault",
    "SendAck",
    "SendNack",
    "TaskCompleted",
    "TaskNeeded",
    "TimeoutElapsed",
    "UnboundRole",
    "UnknownNode",
    "UnknownTarget",
    "UnsupportedVersion",
    "WireFrame",
    "actor_start",
    "actor_step",
    "bare_actor",
    "checkpoint_replay",
    "compute_metrics",
    "decode_frame",
    "encode_frame",
    "make_envelope",
    "read_log",
    "replay_records",
    "resume_instance",
    "start_instance",
]
