"""Per-instance supervision: serialized event loop, bounded-pool dispatcher
with parked deliveries, append-only log, crash restart, completion tracking.

All mutation funnels through one lock per shard. Everything a shard does is
committed to memory immediately before the describing log record is appended,
so each append is an exact replay boundary (see runtime.replay).
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import deque
from dataclasses import replace
from typing import Callable

from sbpm.compiler.bundle import Bundle
from sbpm.model import PayloadError, validate_payload
from sbpm.runtime import events as ev
from sbpm.runtime.actor import (
    AWAITING_MESSAGE,
    AWAITING_TASK,
    CRASHED,
    HALTED,
    RUNNING,
    ActorState,
    ChoiceMade,
    Consumed,
    Entered,
    Halted,
    MessageAvailable,
    SendAck,
    SendNack,
    SendRequested,
    TaskCompleted,
    TaskNeeded,
    TimedOut,
    TimeoutElapsed,
    TimerNeeded,
    UnconsumedWarning,
    actor_continue,
    actor_start,
    actor_step,
    bare_actor,
)
from sbpm.runtime import semantics
from sbpm.runtime.envelope import Envelope
from sbpm.runtime.errors import (
    InstanceNotRunning,
    PayloadInvalid,
    RuntimeFault,
    UnboundRole,
    UnknownNode,
    UnknownTarget,
)
from sbpm.runtime.events import EventLog, envelope_data
from sbpm.runtime.replay import (
    STATUS_COMPLETED,
    STATUS_FAILED,
    STATUS_RUNNING,
    InstanceView,
    replay_records,
)

DELIVERED = "delivered"
NACK_FULL = "nack_full"
ROUTED_REMOTE = "routed_remote"
ROUTED_EXTERNAL = "routed_external"

ON_FULL_BLOCK = "block"
ON_FULL_DROP_ERROR = "drop-error"

NACK_POOL_FULL = "pool_full"


class InstanceSink:
    """Callbacks a host (engine, CLI, test) hangs off a shard. All no-ops."""

    def task_needed(self, shard: "InstanceShard", subject: str, need: TaskNeeded) -> None:
        pass

    def task_invalidated(self, shard: "InstanceShard", subject: str) -> None:
        pass

    def subject_halted(self, shard: "InstanceShard", subject: str) -> None:
        pass

    def warning(self, shard: "InstanceShard", subject: str, message: str) -> None:
        pass

    def instance_completed(self, shard: "InstanceShard") -> None:
        pass

    def instance_failed(self, shard: "InstanceShard", reason: str) -> None:
        pass


def _default_timer_factory(delay_ms: int, callback: Callable[[], None]):
    timer = threading.Timer(delay_ms / 1000.0, callback)
    timer.daemon = True
    timer.start()
    return timer


class InstanceShard:
    """The slice of one process instance hosted on one node.

    For a single-node instance the shard is the whole instance. Envelopes to
    subjects placed elsewhere go through `remote_router`; envelopes to
    external subjects go through `external_router`.
    """

    def __init__(
        self,
        bundle: Bundle,
        instance_id: str,
        *,
        node_id: str = "local",
        placement: "dict[str, str] | None" = None,
        bindings: "dict[str, str] | None" = None,
        log_path=None,
        sink: "InstanceSink | None" = None,
        remote_router=None,
        external_router=None,
        external_routes: "dict[str, str] | None" = None,
        on_full: str = ON_FULL_BLOCK,
        timer_factory=None,
        is_origin: bool = True,
        on_append=None,
        _preload_log=None,
    ):
        self.bundle = bundle
        self.instance_id = instance_id
        self.node_id = node_id
        self.bindings = dict(bindings or {})
        self.placement = {s: (placement or {}).get(s, node_id) for s in bundle.subject_ids()}
        self.is_origin = is_origin
        self.local_subjects = tuple(s for s in bundle.subject_ids() if self.placement[s] == node_id)
        self.remote_subjects = tuple(s for s in bundle.subject_ids() if self.placement[s] != node_id)

        self._sink = sink or InstanceSink()
        self._remote_router = remote_router
        self._external_router = external_router
        self._external_routes = dict(bundle.supervisor.external_routes)
        self._external_routes.update(external_routes or {})
        self._on_full = on_full
        self._timer_factory = timer_factory or _default_timer_factory

        self._lock = threading.RLock()
        self._log = EventLog(log_path, on_append=on_append, preload=_preload_log)
        self._actors: dict[str, ActorState] = {}
        self._queue: deque = deque()
        self._parked: dict[str, deque] = {s: deque() for s in self.local_subjects}
        self._delivered_high: dict[tuple[str, str], int] = {}
        self._outstanding_remote: dict[tuple[str, int], tuple[str, Envelope]] = {}
        self._open_waits: dict[str, TaskNeeded] = {}
        self._timers: dict[tuple[str, int], object] = {}
        self._local_halted: set[str] = set()
        self._remote_halted: set[str] = set()
        self._restart_times: dict[str, list[float]] = {}
        self._status = STATUS_RUNNING
        self._terminated = False
        self.failure_reason: str | None = None
        self._started = False
        # Pools must accept deliveries from peers that start before we do.
        for subject in sorted(self.local_subjects):
            self._actors[subject] = bare_actor(bundle, subject)

    # ------------------------------------------------------------------ API

    @property
    def status(self) -> str:
        return self._status

    def log_records(self) -> tuple[ev.EventRecord, ...]:
        return self._log.records()

    def state(self) -> InstanceView:
        with self._lock:
            return InstanceView(
                instance_id=self.instance_id,
                bundle_hash=self.bundle.manifest.content_hash,
                actors=dict(self._actors),
                bindings=dict(self.bindings),
                status=self._status,
                log=self._log.records(),
            )

    def start(self) -> None:
        with self._lock:
            if self._started:
                return
            self._started = True
            for subject in sorted(self.local_subjects):
                final, steps = actor_start(self.bundle, self._actors[subject], self.instance_id)
                self._commit(subject, final, steps)
            self._drain()
            self._check_completion()

    def complete_task(self, subject: str, outcome: str, payload=None) -> None:
        """Feed a task completion; raises NoSuchOutcome/PayloadInvalid to the caller."""
        with self._lock:
            self._ensure_running()
            actor = self._actors.get(subject)
            if actor is None:
                raise UnknownTarget(subject)
            final, steps = actor_step(self.bundle, actor, TaskCompleted(outcome, payload), self.instance_id)
            self._open_waits.pop(subject, None)
            self._commit(subject, final, steps)
            self._drain()
            self._check_completion()

    def deliver(self, envelope: Envelope, ack=None) -> str:
        """Dispatch entry for envelopes arriving from outside this shard."""
        with self._lock:
            if self._terminated:
                raise InstanceNotRunning(f"instance {self.instance_id} is {self._status}")
            result = self._deliver_inbound(envelope, ack)
            self._drain()
            self._check_completion()
            return result

    def dispatch(self, envelope: Envelope, ack=None) -> str:
        """Route an envelope: local pool, wire to another node, or external."""
        with self._lock:
            self._ensure_running()
            to = envelope.to_subject
            if to in self._external_routes:
                result = self._route_external(envelope)
            elif self.placement.get(to) is None:
                raise UnknownTarget(to, "not a declared subject")
            elif self.placement[to] != self.node_id:
                self._send_remote(envelope)
                result = ROUTED_REMOTE
            else:
                result = self._deliver_inbound(envelope, ack)
            self._drain()
            self._check_completion()
            return result

    def timeout_fired(self, subject: str, epoch: int) -> None:
        with self._lock:
            if self._terminated:
                return
            self._timers.pop((subject, epoch), None)
            self._apply_actor_event(subject, TimeoutElapsed(epoch))
            self._drain()
            self._check_completion()

    def on_remote_ack(self, envelope: Envelope) -> None:
        with self._lock:
            if self._terminated:
                return
            self._outstanding_remote.pop((envelope.from_subject, envelope.seq), None)
            self._apply_actor_event(envelope.from_subject, SendAck())
            self._drain()
            self._check_completion()

    def on_remote_nack(self, envelope: Envelope, reason: str) -> None:
        with self._lock:
            if self._terminated:
                return
            if reason == NACK_POOL_FULL:
                self._apply_actor_event(envelope.from_subject, SendNack())
            else:
                self._outstanding_remote.pop((envelope.from_subject, envelope.seq), None)
                self._crash(envelope.from_subject, f"remote delivery failed: {reason}")
            self._drain()
            self._check_completion()

    def inject_crash(self, subject: str, reason: str = "injected crash") -> None:
        with self._lock:
            if self._terminated:
                return
            self._crash(subject, reason)
            self._drain()
            self._check_completion()

    def fail(self, reason: str) -> None:
        """Fail the whole instance (supervisor-level fault)."""
        with self._lock:
            self._fail(reason)

    def note_remote_halt(self, subject: str) -> None:
        with self._lock:
            self._remote_halted.add(subject)
            self._check_completion()

    def finalize_remote(self) -> None:
        """Origin says the instance completed; close out this non-origin shard."""
        with self._lock:
            if self._status == STATUS_RUNNING:
                self._status = STATUS_COMPLETED
                self._terminate()

    def open_waits(self) -> dict[str, TaskNeeded]:
        with self._lock:
            return dict(self._open_waits)

    def outstanding_remote(self) -> tuple[tuple[str, Envelope], ...]:
        with self._lock:
            return tuple(self._outstanding_remote.values())

    def resend_outstanding(self, node_id: str) -> None:
        """Re-frame unacked envelopes toward a reconnected node (receiver dedupes)."""
        with self._lock:
            for node, envelope in list(self._outstanding_remote.values()):
                if node == node_id and self._remote_router is not None:
                    self._remote_router.send(node, envelope)

    # ------------------------------------------------------------ internals

    def _ensure_running(self) -> None:
        if self._terminated or self._status != STATUS_RUNNING:
            raise InstanceNotRunning(f"instance {self.instance_id} is {self._status}")

    def _capacity(self, subject: str) -> int:
        return self.bundle.pool_capacity(subject)

    def _commit(self, subject: str, final: ActorState, steps: list) -> None:
        if not steps:
            self._actors[subject] = final
            return
        for snapshot, effect in steps:
            self._actors[subject] = snapshot
            self._apply_effect(subject, snapshot, effect)

    def _apply_effect(self, subject: str, snapshot: ActorState, effect) -> None:
        if isinstance(effect, Entered):
            self._log.append(subject, ev.STATE_ENTERED, {"state": effect.state_id, "index": effect.index, "kind": effect.kind})
        elif isinstance(effect, ChoiceMade):
            self._log.append(subject, ev.CHOICE_MADE, {"state": effect.state_id, "outcome": effect.outcome, "payload": effect.payload})
        elif isinstance(effect, Consumed):
            self._log.append(subject, ev.MSG_CONSUMED, envelope_data(effect.envelope))
            self._queue.append(("drain", subject))
        elif isinstance(effect, TimedOut):
            self._log.append(subject, ev.TIMEOUT_FIRED, {"state": effect.state_id})
        elif isinstance(effect, SendRequested):
            self._dispatch_from_local(subject, effect.envelope)
        elif isinstance(effect, TaskNeeded):
            self._open_waits[subject] = effect
            self._sink.task_needed(self, subject, effect)
        elif isinstance(effect, TimerNeeded):
            self._arm_timer(subject, effect.ms, effect.epoch)
        elif isinstance(effect, Halted):
            self._log.append(subject, ev.SUBJECT_HALTED, {"state": effect.state_id})
            self._local_halted.add(subject)
            self._sink.subject_halted(self, subject)
        elif isinstance(effect, UnconsumedWarning):
            self._sink.warning(self, subject, f"{subject} halted with {effect.count} unconsumed message(s)")

    def _dispatch_from_local(self, sender: str, envelope: Envelope) -> None:
        to = envelope.to_subject
        try:
            if to in self._external_routes:
                self._log.append(sender, ev.MSG_SENT, envelope_data(envelope))
                self._route_external(envelope)
                return
            if self.placement.get(to) is None:
                raise UnknownTarget(to, "not a declared subject")
            if self.placement[to] != self.node_id:
                self._log.append(sender, ev.MSG_SENT, envelope_data(envelope))
                self._send_remote(envelope)
                return
        except RuntimeFault as exc:
            self._crash(sender, str(exc))
            return

        target = self._actors[to]
        if len(target.pool) < self._capacity(to):
            self._log.append(sender, ev.MSG_SENT, envelope_data(envelope))
            self._commit_delivery(envelope, ("local", sender))
        elif self._on_full == ON_FULL_DROP_ERROR:
            self._log.append(sender, ev.MSG_SENT, envelope_data(envelope))
            self._fail(f"PoolOverflow: input pool of {to!r} is full (drop-error mode)")
        else:
            # Park: the sender must show blocked_send before MSG_SENT lands
            # so the append boundary replays exactly.
            self._apply_actor_event(sender, SendNack())
            self._log.append(sender, ev.MSG_SENT, envelope_data(envelope))
            self._parked[to].append((envelope, ("local", sender)))

    def _send_remote(self, envelope: Envelope) -> None:
        node = self.placement[envelope.to_subject]
        if self._remote_router is None:
            raise UnknownNode(node)
        self._outstanding_remote[(envelope.from_subject, envelope.seq)] = (node, envelope)
        self._remote_router.send(node, envelope)

    def _route_external(self, envelope: Envelope) -> str:
        hint = self._external_routes.get(envelope.to_subject, "")
        if not hint or self._external_router is None:
            raise UnknownTarget(envelope.to_subject, "no external route configured")
        self._outstanding_remote[(envelope.from_subject, envelope.seq)] = (hint, envelope)
        self._external_router.send(hint, envelope)
        return ROUTED_EXTERNAL

    def _deliver_inbound(self, envelope: Envelope, ack) -> str:
        to = envelope.to_subject
        if to not in self._actors:
            raise UnknownTarget(to, f"not hosted on node {self.node_id!r}")
        self._validate_payload(envelope)

        key = (envelope.from_subject, to)
        if envelope.seq <= self._delivered_high.get(key, 0):
            # Duplicate of an already-delivered envelope (resend after a link
            # drop): re-ack so the sender unblocks, deliver nothing.
            if ack is not None and ack[0] == "cb":
                ack[1](envelope)
            return DELIVERED
        for parked_env, _ in self._parked[to]:
            if parked_env.from_subject == envelope.from_subject and parked_env.seq == envelope.seq:
                return NACK_FULL  # still parked from an earlier attempt

        target = self._actors[to]
        if len(target.pool) < self._capacity(to):
            self._commit_delivery(envelope, ack)
            return DELIVERED
        if self._on_full == ON_FULL_DROP_ERROR:
            self._fail(f"PoolOverflow: input pool of {to!r} is full (drop-error mode)")
            return NACK_FULL
        self._parked[to].append((envelope, ack))
        return NACK_FULL

    def _validate_payload(self, envelope: Envelope) -> None:
        try:
            message = self.bundle.message(envelope.message_id)
        except KeyError:
            raise UnknownTarget(envelope.to_subject, f"unknown message {envelope.message_id!r}") from None
        schema = self.bundle.schema(message.bo) if message.bo else None
        try:
            validate_payload(schema, envelope.payload)
        except PayloadError as exc:
            raise PayloadInvalid(str(exc)) from exc

    def _commit_delivery(self, envelope: Envelope, ack) -> None:
        to = envelope.to_subject
        target = self._actors[to]
        self._actors[to] = replace(target, pool=target.pool + (envelope,))
        self._delivered_high[(envelope.from_subject, to)] = envelope.seq
        self._log.append(to, ev.MSG_DELIVERED, envelope_data(envelope))
        if ack is not None:
            kind = ack[0]
            if kind == "local":
                self._queue.append(("actor_event", ack[1], SendAck()))
            elif kind == "cb":
                ack[1](envelope)
        self._queue.append(("actor_event", to, MessageAvailable()))

    def _drain_parked(self, subject: str) -> None:
        q = self._parked.get(subject)
        if not q:
            return
        while q and len(self._actors[subject].pool) < self._capacity(subject):
            envelope, ack = q.popleft()
            self._commit_delivery(envelope, ack)

    def _apply_actor_event(self, subject: str, event) -> None:
        actor = self._actors.get(subject)
        if actor is None or actor.status == CRASHED:
            return
        try:
            final, steps = actor_step(self.bundle, actor, event, self.instance_id)
        except RuntimeFault as exc:
            self._crash(subject, str(exc))
            return
        self._commit(subject, final, steps)

    def _drain(self) -> None:
        while self._queue:
            if self._terminated:
                self._queue.clear()
                return
            item = self._queue.popleft()
            if item[0] == "actor_event":
                self._apply_actor_event(item[1], item[2])
            elif item[0] == "drain":
                self._drain_parked(item[1])

    def _arm_timer(self, subject: str, ms: int, epoch: int) -> None:
        # At most one pending receive per subject: drop any stale timer now
        # instead of letting it fire into an epoch check.
        self._cancel_timers(subject)
        handle = self._timer_factory(ms, lambda: self.timeout_fired(subject, epoch))
        self._timers[(subject, epoch)] = handle

    def _cancel_timers(self, subject: "str | None" = None) -> None:
        for key in list(self._timers):
            if subject is None or key[0] == subject:
                handle = self._timers.pop(key)
                cancel = getattr(handle, "cancel", None)
                if cancel is not None:
                    cancel()

    def _crash(self, subject: str, reason: str) -> None:
        if self._terminated:
            return
        actor = self._actors.get(subject)
        if actor is None or actor.status == CRASHED:
            return
        self._cancel_timers(subject)
        self._actors[subject] = replace(actor, status=CRASHED)
        self._log.append(subject, ev.CRASHED, {"reason": reason})
        self._open_waits.pop(subject, None)
        self._sink.task_invalidated(self, subject)
        self._apply_restart_policy(subject, reason)

    def _apply_restart_policy(self, subject: str, reason: str) -> None:
        policy = self.bundle.supervisor.restart_policy
        if policy.kind != "replay":
            self._fail(f"{subject} crashed: {reason}")
            return
        now = time.monotonic()
        times = [t for t in self._restart_times.get(subject, []) if now - t < policy.window_s]
        if len(times) >= policy.max_restarts:
            self._fail(f"{subject} exceeded {policy.max_restarts} restarts in {policy.window_s}s: {reason}")
            return
        times.append(now)
        self._restart_times[subject] = times
        self._restart(subject)

    def _restart(self, subject: str) -> None:
        self._log.append(subject, ev.RESTARTED, {})
        result = replay_records(self._log.records(), self.bundle, self.local_subjects)
        rebuilt = result.instance.actors[subject]
        self._actors[subject] = rebuilt
        self._reissue_wait(subject, rebuilt, result)

    def _reissue_wait(self, subject: str, actor: ActorState, result) -> None:
        program = self.bundle.program(subject)
        state = program.state(actor.current)
        if actor.status == AWAITING_TASK:
            need = _wait_for_state(state)
            self._open_waits[subject] = need
            self._sink.task_needed(self, subject, need)
            return
        if actor.status == AWAITING_MESSAGE:
            if state.timeout_ms and semantics.timeout_arm(state) is not None:
                self._arm_timer(subject, state.timeout_ms, actor.epoch)
            self._queue.append(("actor_event", subject, MessageAvailable()))
            return
        if actor.pending_send is not None:
            envelope = actor.pending_send.envelope
            key = (envelope.from_subject, envelope.seq)
            still_outstanding = any(
                e.from_subject == key[0] and e.seq == key[1] for e in result.outstanding
            )
            if not still_outstanding:
                self._queue.append(("actor_event", subject, SendAck()))
                return
            to = envelope.to_subject
            try:
                if to in self._external_routes:
                    if key not in self._outstanding_remote:
                        self._route_external(envelope)
                elif self.placement.get(to) != self.node_id:
                    if key not in self._outstanding_remote:
                        self._send_remote(envelope)
                elif not any(
                    p.from_subject == key[0] and p.seq == key[1] for p, _ in self._parked[to]
                ):
                    # Not parked and not delivered: redo the delivery attempt
                    # without re-logging MSG_SENT.
                    target = self._actors[to]
                    if len(target.pool) < self._capacity(to):
                        self._commit_delivery(envelope, ("local", subject))
                    else:
                        self._parked[to].append((envelope, ("local", subject)))
            except RuntimeFault as exc:
                self._crash(subject, str(exc))
            return
        if actor.status == RUNNING:
            # The log was cut mid-transition; finish it from the fold's hint.
            hint = result.hints.get(subject)
            if hint is None and state.kind == "send" and semantics.auto_send_arm(state) is not None:
                hint = ("auto",)
            if hint is not None:
                try:
                    final, steps = actor_continue(self.bundle, actor, hint, self.instance_id)
                except RuntimeFault as exc:
                    self._crash(subject, str(exc))
                    return
                self._commit(subject, final, steps)
            else:
                self._queue.append(("actor_event", subject, MessageAvailable()))

    def _check_completion(self) -> None:
        if self._terminated or self._status != STATUS_RUNNING:
            return
        if not self._local_halted.issuperset(self.local_subjects):
            return
        if not self._remote_halted.issuperset(self.remote_subjects):
            return
        if not self.is_origin:
            return  # origin announces completion; we get finalize_remote()
        self._status = STATUS_COMPLETED
        self._log.append(ev.SUPERVISOR, ev.INSTANCE_COMPLETED, {})
        self._terminate()
        self._sink.instance_completed(self)

    def _fail(self, reason: str) -> None:
        if self._terminated:
            return
        self._status = STATUS_FAILED
        self.failure_reason = reason
        self._log.append(ev.SUPERVISOR, ev.CRASHED, {"reason": reason})
        self._terminate()
        self._sink.instance_failed(self, reason)

    def _terminate(self) -> None:
        self._terminated = True
        self._cancel_timers()
        self._queue.clear()
        self._log.close()


def _wait_for_state(state) -> TaskNeeded:
    if state.kind == "function":
        return TaskNeeded(
            kind="choose_outcome",
            state_id=state.id,
            state_name=state.name,
            options=tuple(a.outcome for a in semantics.outcome_arms(state)),
            refinement=state.refinement,
            on_error=state.on_error,
        )
    return TaskNeeded(
        kind="provide_send_payload",
        state_id=state.id,
        state_name=state.name,
        options=tuple((a.message, a.to_subject, a.bo) for a in semantics.emit_arms(state)),
    )


def check_bindings(bundle: Bundle, bindings: dict) -> None:
    for _, role in bundle.roles:
        if role and role not in bindings:
            raise UnboundRole(role)


def start_instance(
    bundle: Bundle,
    bindings: "dict[str, str] | None" = None,
    placement: "dict[str, str] | None" = None,
    **kwargs,
) -> InstanceShard:
    """Create and start a (by default, all-local) instance; returns its shard."""
    bindings = dict(bindings or {})
    check_bindings(bundle, bindings)
    node_id = kwargs.pop("node_id", "local")
    if placement:
        for subject, node in placement.items():
            if node != node_id and kwargs.get("remote_router") is None:
                raise UnknownNode(node)
    instance_id = kwargs.pop("instance_id", None) or str(uuid.uuid4())
    shard = InstanceShard(
        bundle,
        instance_id,
        node_id=node_id,
        placement=placement,
        bindings=bindings,
        **kwargs,
    )
    shard.start()
    return shard


def resume_instance(
    bundle: Bundle,
    instance_id: str,
    log: "tuple[ev.EventRecord, ...]",
    *,
    bindings: "dict[str, str] | None" = None,
    **kwargs,
) -> InstanceShard:
    """Rebuild a live shard from a persisted log and pick up where it left off."""
    shard = InstanceShard(
        bundle,
        instance_id,
        bindings=bindings,
        _preload_log=log,
        **kwargs,
    )
    result = replay_records(log, bundle, shard.local_subjects)
    with shard._lock:
        shard._status = result.instance.status
        shard._actors = dict(result.instance.actors)
        for key, high in _delivered_watermarks(log).items():
            shard._delivered_high[key] = high
        if shard._status != STATUS_RUNNING:
            shard._terminate()
            return shard

        halted_logged = {r.subject for r in log if r.kind == ev.SUBJECT_HALTED}
        shard._local_halted = {s for s, a in shard._actors.items() if a.status == HALTED}
        for subject in sorted(shard._local_halted - halted_logged):
            # Cut between STATE_ENTERED(end) and SUBJECT_HALTED: finish the halt.
            state = bundle.program(subject).state(shard._actors[subject].current)
            shard._log.append(subject, ev.SUBJECT_HALTED, {"state": state.id})
            shard._sink.subject_halted(shard, subject)

        # Actors whose first entry never hit the log (epoch -1 means bare).
        started: set[str] = set()
        for subject in sorted(shard.local_subjects):
            actor = shard._actors.get(subject)
            if actor is None:
                shard._actors[subject] = bare_actor(bundle, subject)
                actor = shard._actors[subject]
            if actor.epoch == -1:
                final, steps = actor_start(bundle, actor, instance_id)
                shard._commit(subject, final, steps)
                started.add(subject)

        for subject, actor in sorted(shard._actors.items()):
            if subject in started or actor.status == HALTED:
                continue
            if actor.status == CRASHED:
                shard._apply_restart_policy(subject, "crash recovery on resume")
                continue
            shard._reissue_wait(subject, actor, result)
        shard._drain()
        shard._check_completion()
    return shard


def _delivered_watermarks(log) -> dict[tuple[str, str], int]:
    high: dict[tuple[str, str], int] = {}
    for record in log:
        if record.kind == ev.MSG_DELIVERED:
            env = record.data["envelope"]
            key = (env["from"], env["to"])
            high[key] = max(high.get(key, 0), env["seq"])
    return high
