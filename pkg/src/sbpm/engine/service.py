"""Engine node: bundle repository, instance lifecycle, task/worklist state,
node registry, service-refinement calls, and inter-node coordination.

Envelopes travel over the framed TCP protocol; control traffic (shard
startup, halt/crash notifications, trace collection) uses the peer engine's
internal HTTP endpoints. One EngineNode hosts any number of instance shards.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import urllib.error
import urllib.request
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from sbpm.compiler import Bundle
from sbpm.engine.errors import NotYourTask, TaskGone, UnknownInstance
from sbpm.engine.repository import BundleRepository
from sbpm.runtime import (
    NACK_FULL,
    InstanceNotRunning,
    InstanceShard,
    InstanceSink,
    NoSuchOutcome,
    RuntimeFault,
    UnknownNode,
    compute_metrics,
)
from sbpm.runtime.envelope import Envelope
from sbpm.runtime.events import EventRecord
from sbpm.runtime.instance import check_bindings
from sbpm.runtime.net import FrameHandler, NodeNetwork
from sbpm.runtime.replay import STATUS_RUNNING

SERVICE_PREFIXES = ("http://", "https://")
NACK_POOL_FULL_REASON = "pool_full"


def is_service_binding(agent_id: str) -> bool:
    return agent_id.startswith(SERVICE_PREFIXES)


@dataclass
class Task:
    task_id: str
    instance_id: str
    subject: str
    state_id: str
    state_name: str
    state_index: int
    kind: str
    options: tuple
    assigned_role: str
    agent_id: str
    created_ts: int
    # Resolved schema field trees by schema id, so the task console can
    # generate forms without a second round trip.
    schemas: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        options: "list | dict"
        if self.kind == "choose_outcome":
            options = list(self.options)
        else:
            options = [
                {
                    "message": m,
                    "to": to,
                    "schema": None if schema is None else {"id": schema, "fields": self.schemas.get(schema, [])},
                }
                for (m, to, schema) in self.options
            ]
        return {
            "task_id": self.task_id,
            "instance_id": self.instance_id,
            "subject": self.subject,
            "state": {"id": self.state_id, "name": self.state_name, "index": self.state_index},
            "kind": self.kind,
            "options": options,
            "assigned_role": self.assigned_role,
            "agent_id": self.agent_id,
            "created_ts": self.created_ts,
        }


@dataclass
class NodeInfo:
    node_id: str
    host: str
    port: int
    wire_port: int
    last_seen_ts: int
    status: str = "up"

    def to_json(self) -> dict:
        return {
            "node_id": self.node_id,
            "host": self.host,
            "port": self.port,
            "wire_port": self.wire_port,
            "last_seen_ts": self.last_seen_ts,
            "status": self.status,
        }


@dataclass
class InstanceRecord:
    instance_id: str
    bundle_hash: str
    bundle: Bundle
    shard: InstanceShard
    bindings: dict
    placement: dict
    origin_node: str
    origin_url: str = ""
    log_path: "Path | None" = None


@dataclass
class EngineConfig:
    data_dir: Path
    node_id: str = "local"
    host: str = "127.0.0.1"
    http_port: int = 0
    wire_port: "int | None" = None  # default: http_port + 1 once bound
    service_timeout_s: float = 30.0
    on_full: str = "block"


class _Router:
    """Shard-facing remote send hook; frames envelopes toward a node."""

    def __init__(self, node: "EngineNode", instance_id: str):
        self.node = node
        self.instance_id = instance_id

    def send(self, node_id: str, envelope: Envelope) -> None:
        self.node._net.send_msg(node_id, self.instance_id, envelope)


class _ExternalRouter:
    """Routes envelopes across instance boundaries via node/instance/subject hints."""

    def __init__(self, node: "EngineNode", record_getter):
        self.node = node
        self._record = record_getter

    def send(self, hint: str, envelope: Envelope) -> None:
        self.node._route_external(hint, envelope, self._record())


class EngineNode(FrameHandler, InstanceSink):
    def __init__(self, config: EngineConfig):
        self.config = config
        self.node_id = config.node_id
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.repository = BundleRepository(self.data_dir / "bundles")
        (self.data_dir / "instances").mkdir(exist_ok=True)

        self._instances: dict[str, InstanceRecord] = {}
        self._tasks: dict[str, Task] = {}
        self._nodes: dict[str, NodeInfo] = {}
        self._ext_pending: dict[tuple[str, str, int], tuple[InstanceShard, Envelope]] = {}
        self._lock = threading.RLock()

        wire_port = config.wire_port if config.wire_port is not None else (
            config.http_port + 1 if config.http_port else 0
        )
        self._net = NodeNetwork(self.node_id, self, host=config.host, port=wire_port)
        self.wire_port = self._net.port
        self.http_url = ""  # set by the HTTP layer once bound

        # Outbound control-plane notifications run off-thread: sinks fire
        # under the shard lock and must never block on peer HTTP round trips.
        self._notify_queue: "queue.Queue" = queue.Queue()
        self._notifier = threading.Thread(target=self._notify_loop, daemon=True, name=f"notify-{self.node_id}")
        self._notifier.start()

    def _notify(self, fn) -> None:
        self._notify_queue.put(fn)

    def _notify_loop(self) -> None:
        while True:
            fn = self._notify_queue.get()
            if fn is None:
                return
            try:
                fn()
            except Exception:
                pass  # a dead peer must not take the notifier down

    # ------------------------------------------------------------- bundles

    def deploy(self, data: bytes) -> str:
        return self.repository.deploy(data)

    def list_bundles(self) -> list[dict]:
        return self.repository.list()

    # ------------------------------------------------------------ instances

    def create_instance(
        self,
        bundle_hash: str,
        bindings: "dict[str, str] | None" = None,
        placement: "dict[str, str] | None" = None,
        on_full: "str | None" = None,
        external_routes: "dict[str, str] | None" = None,
    ) -> str:
        bundle = self.repository.load(bundle_hash)
        bindings = dict(bindings or {})
        check_bindings(bundle, bindings)
        placement = {s: (placement or {}).get(s, self.node_id) for s in bundle.subject_ids()}
        with self._lock:
            for node in set(placement.values()):
                if node != self.node_id and node not in self._nodes:
                    raise UnknownNode(node)
        instance_id = str(uuid.uuid4())
        self._start_shard(
            instance_id,
            bundle_hash,
            bundle,
            bindings,
            placement,
            origin_node=self.node_id,
            origin_url=self.http_url,
            is_origin=True,
            on_full=on_full or self.config.on_full,
            external_routes=external_routes,
        )
        return instance_id

    def start_remote_shard(self, payload: dict) -> None:
        """Internal: a peer engine asks this node to host part of an instance."""
        bundle = self.repository.load(payload["hash"])
        self._start_shard(
            payload["instance_id"],
            payload["hash"],
            bundle,
            payload.get("bindings") or {},
            payload["placement"],
            origin_node=payload["origin_node"],
            origin_url=payload.get("origin_url", ""),
            is_origin=False,
            on_full=payload.get("on_full", self.config.on_full),
            external_routes=payload.get("external_routes"),
        )

    def _start_shard(
        self,
        instance_id: str,
        bundle_hash: str,
        bundle: Bundle,
        bindings: dict,
        placement: dict,
        *,
        origin_node: str,
        origin_url: str,
        is_origin: bool,
        on_full: str,
        external_routes: "dict[str, str] | None",
    ) -> None:
        instance_dir = self.data_dir / "instances" / instance_id
        instance_dir.mkdir(parents=True, exist_ok=True)
        log_path = instance_dir / f"log-{self.node_id}.ndjson"

        record_box: list[InstanceRecord] = []
        shard = InstanceShard(
            bundle,
            instance_id,
            node_id=self.node_id,
            placement=placement,
            bindings=bindings,
            log_path=log_path,
            sink=self,
            remote_router=_Router(self, instance_id),
            external_router=_ExternalRouter(self, lambda: record_box[0]),
            external_routes=external_routes,
            on_full=on_full,
            is_origin=is_origin,
        )
        record = InstanceRecord(
            instance_id=instance_id,
            bundle_hash=bundle_hash,
            bundle=bundle,
            shard=shard,
            bindings=bindings,
            placement=placement,
            origin_node=origin_node,
            origin_url=origin_url,
            log_path=log_path,
        )
        record_box.append(record)
        with self._lock:
            self._instances[instance_id] = record
        self._write_meta(record)

        if is_origin:
            self._prepare_remote_shards(record)
        shard.start()
        self._write_meta(record)

    def _prepare_remote_shards(self, record: InstanceRecord) -> None:
        remote_nodes = sorted(
            {n for n in record.placement.values() if n != self.node_id}
        )
        for node_id in remote_nodes:
            info = self._node_info(node_id)
            base = f"http://{info.host}:{info.port}"
            data = self.repository.load_bytes(record.bundle_hash)
            _http_post_bytes(f"{base}/bundles", data)
            _http_post_json(
                f"{base}/internal/instances",
                {
                    "instance_id": record.instance_id,
                    "hash": record.bundle_hash,
                    "bindings": record.bindings,
                    "placement": record.placement,
                    "origin_node": self.node_id,
                    "origin_url": self.http_url,
                },
            )

    def _node_info(self, node_id: str) -> NodeInfo:
        with self._lock:
            info = self._nodes.get(node_id)
        if info is None:
            raise UnknownNode(node_id)
        return info

    def get_record(self, instance_id: str) -> InstanceRecord:
        with self._lock:
            record = self._instances.get(instance_id)
        if record is None:
            raise UnknownInstance(instance_id)
        return record

    def instance_report(self, instance_id: str) -> dict:
        record = self.get_record(instance_id)
        view = record.shard.state()
        events = self.trace(instance_id)
        metrics = compute_metrics([EventRecord.from_json(e) for e in events])
        return {
            "instance_id": instance_id,
            "status": record.shard.status,
            "bundle_hash": record.bundle_hash,
            "bindings": dict(record.bindings),
            "placement": dict(record.placement),
            "failure_reason": record.shard.failure_reason,
            "actors": {
                s: {
                    "state_id": record.bundle.program(s).state(a.current).id,
                    "state_name": record.bundle.program(s).state(a.current).name,
                    "index": a.current,
                    "status": a.status,
                    "pool": [e.to_json() for e in a.pool],
                }
                for s, a in sorted(view.actors.items())
            },
            "metrics": metrics,
        }

    def trace(self, instance_id: str) -> list[dict]:
        """Merged event log across every node hosting part of the instance."""
        record = self.get_record(instance_id)
        events = [dict(r.to_json(), node=self.node_id) for r in record.shard.log_records()]
        remote_nodes = {n for n in record.placement.values() if n != self.node_id}
        for node_id in sorted(remote_nodes):
            try:
                info = self._node_info(node_id)
                doc = _http_get_json(
                    f"http://{info.host}:{info.port}/internal/instances/{instance_id}/events"
                )
                events.extend(dict(e, node=node_id) for e in doc["events"])
            except (UnknownNode, OSError, urllib.error.URLError):
                continue
        events.sort(key=lambda e: (e["ts"], e["node"], e["seq"]))
        return events

    def local_events(self, instance_id: str) -> list[dict]:
        record = self.get_record(instance_id)
        return [r.to_json() for r in record.shard.log_records()]

    def list_instances(self) -> list[dict]:
        with self._lock:
            records = list(self._instances.values())
        return [
            {"instance_id": r.instance_id, "status": r.shard.status, "bundle_hash": r.bundle_hash}
            for r in sorted(records, key=lambda r: r.instance_id)
        ]

    # --------------------------------------------------------------- tasks

    def list_tasks(self, agent_id: str) -> list[Task]:
        with self._lock:
            tasks = [t for t in self._tasks.values() if t.agent_id == agent_id]
        return sorted(tasks, key=lambda t: (t.created_ts, t.task_id))

    def all_open_tasks(self) -> list[Task]:
        with self._lock:
            return sorted(self._tasks.values(), key=lambda t: (t.created_ts, t.task_id))

    def complete_task(self, task_id: str, outcome: str, payload=None, agent_id: "str | None" = None) -> None:
        with self._lock:
            task = self._tasks.get(task_id)
        if task is None:
            raise TaskGone(task_id)
        if agent_id is not None and task.agent_id != agent_id:
            raise NotYourTask(task_id, agent_id)
        record = self.get_record(task.instance_id)
        try:
            record.shard.complete_task(task.subject, outcome, payload)
        except InstanceNotRunning:
            with self._lock:
                self._tasks.pop(task_id, None)
            raise TaskGone(task_id) from None
        # NoSuchOutcome/PayloadInvalid propagate; the task stays open.
        with self._lock:
            self._tasks.pop(task_id, None)

    # ------------------------------------------------------ shard callbacks

    def task_needed(self, shard: InstanceShard, subject: str, need) -> None:
        record = self._instances.get(shard.instance_id)
        if record is None:
            return
        role = record.bundle.role_of(subject)
        agent = record.bindings.get(role, "")
        if need.refinement and is_service_binding(agent):
            threading.Thread(
                target=self._call_refinement,
                args=(record, subject, need, agent),
                daemon=True,
                name=f"refinement-{subject}",
            ).start()
            return
        schemas: dict = {}
        if need.kind == "provide_send_payload":
            for _, _, schema_id in need.options:
                if schema_id is not None and schema_id not in schemas:
                    schemas[schema_id] = [
                        _field_json(f) for f in record.bundle.schema(schema_id).fields
                    ]
        task = Task(
            task_id=str(uuid.uuid4()),
            instance_id=shard.instance_id,
            subject=subject,
            state_id=need.state_id,
            state_name=need.state_name,
            state_index=shard.state().actors[subject].current,
            kind=need.kind,
            options=need.options,
            assigned_role=role,
            agent_id=agent,
            created_ts=int(time.time() * 1000),
            schemas=schemas,
        )
        with self._lock:
            # Exactly one open task per awaiting actor.
            stale = [
                t.task_id
                for t in self._tasks.values()
                if t.instance_id == task.instance_id and t.subject == subject
            ]
            for tid in stale:
                del self._tasks[tid]
            self._tasks[task.task_id] = task

    def task_invalidated(self, shard: InstanceShard, subject: str) -> None:
        with self._lock:
            stale = [
                t.task_id
                for t in self._tasks.values()
                if t.instance_id == shard.instance_id and t.subject == subject
            ]
            for tid in stale:
                del self._tasks[tid]

    def subject_halted(self, shard: InstanceShard, subject: str) -> None:
        if shard.is_origin:
            return
        record = self._instances.get(shard.instance_id)
        if record is None or not record.origin_url:
            return
        url = f"{record.origin_url}/internal/instances/{shard.instance_id}/halted"
        self._notify(lambda: _http_post_json(url, {"subject": subject, "node": self.node_id}))

    def instance_completed(self, shard: InstanceShard) -> None:
        self._finalize_instance(shard, "completed")

    def instance_failed(self, shard: InstanceShard, reason: str) -> None:
        self._finalize_instance(shard, "failed")

    def _finalize_instance(self, shard: InstanceShard, status: str) -> None:
        record = self._instances.get(shard.instance_id)
        if record is None:
            return
        self._write_meta(record)
        self.task_invalidated_all(shard.instance_id)
        if not shard.is_origin:
            return
        remote_nodes = {n for n in record.placement.values() if n != self.node_id}
        for node_id in sorted(remote_nodes):
            try:
                info = self._node_info(node_id)
            except UnknownNode:
                continue
            url = f"http://{info.host}:{info.port}/internal/instances/{shard.instance_id}/finalize"
            self._notify(lambda url=url: _http_post_json(url, {"status": status}))

    def task_invalidated_all(self, instance_id: str) -> None:
        with self._lock:
            stale = [t.task_id for t in self._tasks.values() if t.instance_id == instance_id]
            for tid in stale:
                del self._tasks[tid]

    def note_remote_halt(self, instance_id: str, subject: str) -> None:
        record = self.get_record(instance_id)
        record.shard.note_remote_halt(subject)

    def finalize_shard(self, instance_id: str, status: str) -> None:
        record = self.get_record(instance_id)
        record.shard.finalize_remote()
        self.task_invalidated_all(instance_id)
        self._write_meta(record)

    # -------------------------------------------------- service refinements

    def _call_refinement(self, record: InstanceRecord, subject: str, need, url: str) -> None:
        actor = record.shard.state().actors[subject]
        body = {
            "instance": record.instance_id,
            "subject": subject,
            "state": need.state_id,
            "payload": actor.data,
        }
        try:
            response = _http_post_json(url, body, timeout=self.config.service_timeout_s)
            outcome = response.get("outcome") if isinstance(response, dict) else None
            if not isinstance(outcome, str):
                raise ValueError(f"service response lacks an outcome: {response!r}")
        except (OSError, urllib.error.URLError, TimeoutError):
            # Unreachable or timed out: take the declared error arm, else fail.
            if need.on_error:
                try:
                    record.shard.complete_task(subject, need.on_error)
                except (RuntimeFault, InstanceNotRunning):
                    pass
                return
            record.shard.fail(f"ServiceUnreachable: refinement {need.refinement!r} of {subject!r}")
            return
        except ValueError as exc:
            record.shard.inject_crash(subject, f"BadServiceResponse: {exc}")
            return
        try:
            record.shard.complete_task(subject, outcome, response.get("payload"))
        except NoSuchOutcome:
            record.shard.inject_crash(
                subject, f"BadServiceResponse: undeclared outcome {outcome!r}"
            )
        except (RuntimeFault, InstanceNotRunning):
            pass

    # ------------------------------------------------------------- routing

    def _route_external(self, hint: str, envelope: Envelope, record: InstanceRecord) -> None:
        parts = hint.split("/")
        if len(parts) != 3:
            raise RuntimeFault(f"bad external route hint {hint!r} (want node/instance/subject)")
        node_id, target_instance, target_subject = parts
        rewritten = Envelope(
            instance_id=target_instance,
            from_subject=envelope.from_subject,
            to_subject=target_subject,
            message_id=envelope.message_id,
            correlation_id=envelope.correlation_id,
            seq=envelope.seq,
            payload=envelope.payload,
        )
        with self._lock:
            self._ext_pending[(target_instance, envelope.from_subject, envelope.seq)] = (
                record.shard,
                envelope,
            )
        if node_id == self.node_id:
            self._deliver_local_external(target_instance, rewritten)
        else:
            self._net.send_msg(node_id, target_instance, rewritten)

    def _deliver_local_external(self, target_instance: str, envelope: Envelope) -> None:
        target = self.get_record(target_instance)
        key = (target_instance, envelope.from_subject, envelope.seq)

        def acked(env: Envelope) -> None:
            with self._lock:
                pending = self._ext_pending.pop(key, None)
            if pending is not None:
                shard, original = pending
                shard.on_remote_ack(original)

        try:
            result = target.shard.deliver(envelope, ack=("cb", acked))
        except (RuntimeFault, InstanceNotRunning) as exc:
            with self._lock:
                pending = self._ext_pending.pop(key, None)
            if pending is not None:
                shard, original = pending
                shard.on_remote_nack(original, str(exc))
            return
        if result == NACK_FULL:
            with self._lock:
                pending = self._ext_pending.get(key)
            if pending is not None:
                shard, original = pending
                shard.on_remote_nack(original, "pool_full")

    # --------------------------------------------------------- wire inbound

    def on_msg(self, node_id: str, instance_id: str, envelope: Envelope):
        try:
            record = self.get_record(instance_id)
        except UnknownInstance:
            return "nack", "unknown_instance"

        def acked(env: Envelope) -> None:
            try:
                self._net.send_ack(node_id, instance_id, env)
            except Exception:
                pass

        try:
            result = record.shard.deliver(envelope, ack=("cb", acked))
        except InstanceNotRunning:
            return "nack", "instance_not_running"
        except RuntimeFault as exc:
            return "nack", str(exc)
        if result == NACK_FULL:
            return "nack", "pool_full"
        return "done", None  # the ack callback already fired (or will on drain)

    def on_ack(self, node_id: str, instance_id: str, envelope: Envelope) -> None:
        key = (instance_id, envelope.from_subject, envelope.seq)
        with self._lock:
            pending = self._ext_pending.pop(key, None)
        if pending is not None:
            shard, original = pending
            shard.on_remote_ack(original)
            return
        try:
            record = self.get_record(instance_id)
        except UnknownInstance:
            return
        record.shard.on_remote_ack(envelope)

    def on_nack(self, node_id: str, instance_id: str, envelope: Envelope, reason: str) -> None:
        key = (instance_id, envelope.from_subject, envelope.seq)
        with self._lock:
            pending = self._ext_pending.get(key)
            if pending is not None and reason != NACK_POOL_FULL_REASON:
                self._ext_pending.pop(key, None)
        if pending is not None:
            shard, original = pending
            shard.on_remote_nack(original, reason)
            return
        try:
            record = self.get_record(instance_id)
        except UnknownInstance:
            return
        record.shard.on_remote_nack(envelope, reason)

    def on_node_connected(self, node_id: str) -> None:
        with self._lock:
            records = list(self._instances.values())
        for record in records:
            if record.shard.status == STATUS_RUNNING:
                record.shard.resend_outstanding(node_id)

    # ---------------------------------------------------------------- nodes

    def register_node(self, node_id: str, host: str, port: int, wire_port: "int | None" = None) -> None:
        info = NodeInfo(
            node_id=node_id,
            host=host,
            port=port,
            wire_port=wire_port if wire_port is not None else port + 1,
            last_seen_ts=int(time.time() * 1000),
        )
        with self._lock:
            self._nodes[node_id] = info
        self._net.add_peer(node_id, info.host, info.wire_port)

    def list_nodes(self) -> list[dict]:
        with self._lock:
            nodes = [n.to_json() for n in self._nodes.values()]
        me = NodeInfo(
            node_id=self.node_id,
            host=self.config.host,
            port=int(self.http_url.rsplit(":", 1)[1]) if self.http_url else 0,
            wire_port=self.wire_port,
            last_seen_ts=int(time.time() * 1000),
        )
        return sorted(nodes + [{**me.to_json(), "self": True}], key=lambda n: n["node_id"])

    # ----------------------------------------------------------- persistence

    def _write_meta(self, record: InstanceRecord) -> None:
        instance_dir = self.data_dir / "instances" / record.instance_id
        instance_dir.mkdir(parents=True, exist_ok=True)
        meta = {
            "instance_id": record.instance_id,
            "hash": record.bundle_hash,
            "bindings": record.bindings,
            "placement": record.placement,
            "origin_node": record.origin_node,
            "node_id": self.node_id,
            "status": record.shard.status,
        }
        tmp = instance_dir / "meta.json.tmp"
        tmp.write_text(json.dumps(meta, sort_keys=True, indent=2), encoding="utf-8")
        tmp.replace(instance_dir / "meta.json")

    def close(self) -> None:
        self._notify_queue.put(None)
        self._net.close()
        with self._lock:
            records = list(self._instances.values())
        for record in records:
            record.shard._log.close()


def _field_json(f) -> dict:
    return {
        "name": f.name,
        "type": f.type,
        "required": f.required,
        "children": [_field_json(c) for c in f.children],
    }


def _http_post_json(url: str, body: dict, timeout: float = 10.0) -> dict:
    data = json.dumps(body).encode("utf-8")
    request = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8") or "{}")


def _http_post_bytes(url: str, data: bytes, timeout: float = 10.0) -> dict:
    request = urllib.request.Request(
        url, data=data, headers={"Content-Type": "application/octet-stream"}
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8") or "{}")


def _http_get_json(url: str, timeout: float = 10.0) -> dict:
    with urllib.request.urlopen(url, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8"))
