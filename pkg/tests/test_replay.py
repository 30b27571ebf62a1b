from __future__ import annotations

import pytest

import builders as b
from sbpm.compiler import link_bundle
from sbpm.runtime import (
    AWAITING_MESSAGE,
    STATUS_COMPLETED,
    InstanceShard,
    LogCorrupt,
    checkpoint_replay,
    replay_records,
    resume_instance,
)
from sbpm.runtime import events as ev
from sbpm.runtime.events import EventRecord
from test_runtime_instance import RecordingSink, _backpressure_model, entered_trace


def run_with_snapshots(bundle, bindings, drive):
    """Run an instance snapshotting the live core view at every log append."""
    snapshots: list[dict] = []
    sink = RecordingSink()
    shard = InstanceShard(bundle, "inst-snap", bindings=bindings, sink=sink)
    shard.on_append_hook = None

    def on_append(record):
        snapshots.append(shard.state().core_view())

    shard._log.on_append = on_append
    shard.start()
    drive(shard, sink)
    return shard, snapshots


def test_every_append_is_an_exact_replay_boundary_pingpong(pingpong_model):
    bundle = link_bundle(pingpong_model)
    shard, snapshots = run_with_snapshots(
        bundle,
        {"clerk": "alice", "system": "bot"},
        lambda s, sink: s.complete_task("A", "ok"),
    )
    records = shard.log_records()
    assert shard.status == STATUS_COMPLETED
    assert len(snapshots) == len(records)
    for k in range(1, len(records) + 1):
        view = checkpoint_replay(records[:k], bundle)
        assert view.core_view() == snapshots[k - 1], f"mismatch at prefix {k}"


def test_every_append_is_an_exact_replay_boundary_backpressure():
    bundle = link_bundle(_backpressure_model())
    shard, snapshots = run_with_snapshots(
        bundle,
        {"worker": "w"},
        lambda s, sink: s.complete_task("R", "go"),
    )
    records = shard.log_records()
    assert shard.status == STATUS_COMPLETED
    for k in range(1, len(records) + 1):
        view = checkpoint_replay(records[:k], bundle)
        assert view.core_view() == snapshots[k - 1], f"mismatch at prefix {k}"


def test_prefix_after_delivery_shows_pooled_message(pingpong_model):
    bundle = link_bundle(pingpong_model)
    sink = RecordingSink()
    shard = InstanceShard(bundle, "inst-p", bindings={"clerk": "a", "system": "b"}, sink=sink)
    shard.start()
    shard.complete_task("A", "ok")
    records = shard.log_records()

    delivered_at = next(
        i for i, r in enumerate(records, start=1)
        if r.kind == ev.MSG_DELIVERED and r.data["envelope"]["message"] == "ping"
    )
    view = checkpoint_replay(records[:delivered_at], bundle)
    actor_b = view.actors["B"]
    assert [e.message_id for e in actor_b.pool] == ["ping"]
    assert actor_b.status == AWAITING_MESSAGE


def test_gap_detected():
    with pytest.raises(LogCorrupt):
        replay_records(
            (
                EventRecord(seq=1, ts=0, subject="A", kind=ev.STATE_ENTERED, data={"state": "s0", "index": 0, "kind": "function"}),
                EventRecord(seq=3, ts=0, subject="A", kind=ev.CHOICE_MADE, data={"state": "s0", "outcome": "ok", "payload": None}),
            ),
            link_bundle(_backpressure_model()),
        )


def test_replay_is_pure(pingpong_model):
    bundle = link_bundle(pingpong_model)
    sink = RecordingSink()
    shard = InstanceShard(bundle, "inst-d", bindings={"clerk": "a", "system": "b"}, sink=sink)
    shard.start()
    shard.complete_task("A", "ok")
    records = shard.log_records()
    first = checkpoint_replay(records, bundle)
    second = checkpoint_replay(records, bundle)
    assert first.core_view() == second.core_view()
    assert first.status == STATUS_COMPLETED


def test_resume_from_every_prefix_completes(pingpong_model):
    bundle = link_bundle(pingpong_model)
    sink = RecordingSink()
    shard = InstanceShard(bundle, "inst-r", bindings={"clerk": "a", "system": "b"}, sink=sink)
    shard.start()
    shard.complete_task("A", "ok")
    records = shard.log_records()
    golden_a = entered_trace(records, "A")
    golden_b = entered_trace(records, "B")

    for k in range(len(records) + 1):
        resumed_sink = RecordingSink()
        resumed = resume_instance(
            bundle, "inst-r", records[:k], bindings={"clerk": "a", "system": "b"}, sink=resumed_sink
        )
        for _ in range(4):
            if resumed.status == STATUS_COMPLETED:
                break
            need = resumed_sink.tasks.get("A") or resumed.open_waits().get("A")
            assert need is not None, f"prefix {k}: stalled without an open task"
            resumed.complete_task("A", need.options[0])
        assert resumed.status == STATUS_COMPLETED, f"prefix {k} did not complete"
        final = resumed.log_records()
        assert entered_trace(final, "A") == golden_a, f"prefix {k}"
        assert entered_trace(final, "B") == golden_b, f"prefix {k}"


def test_replay_against_wrong_bundle(pingpong_model, order_model):
    from sbpm.runtime import BundleMismatch

    pingpong = link_bundle(pingpong_model)
    order = link_bundle(order_model)
    sink = RecordingSink()
    shard = InstanceShard(pingpong, "inst-w", bindings={"clerk": "a", "system": "b"}, sink=sink)
    shard.start()
    shard.complete_task("A", "ok")
    with pytest.raises(BundleMismatch):
        checkpoint_replay(shard.log_records(), order)
