from __future__ import annotations

import time

import pytest

import builders as b
from sbpm.compiler import bundle_to_bytes, link_bundle
from sbpm.engine import EngineConfig, EngineNode, EngineServer
from sbpm.runtime import events as ev


@pytest.fixture
def two_nodes(tmp_path):
    n1 = EngineNode(EngineConfig(data_dir=tmp_path / "n1", node_id="n1"))
    n2 = EngineNode(EngineConfig(data_dir=tmp_path / "n2", node_id="n2"))
    s1 = EngineServer(n1, port=0).start()
    s2 = EngineServer(n2, port=0).start()
    n1.register_node("n2", "127.0.0.1", s2.port, wire_port=n2.wire_port)
    n2.register_node("n1", "127.0.0.1", s1.port, wire_port=n1.wire_port)
    yield n1, n2
    s1.close()
    s2.close()
    n1.close()
    n2.close()


def wait_until(predicate, timeout_s=15.0, interval=0.005):
    deadline = time.time() + timeout_s
    while time.time() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return False


def entered_trace(events, subject):
    return [e["data"]["state"] for e in events if e["subject"] == subject and e["kind"] == ev.STATE_ENTERED]


def test_pingpong_split_across_nodes(two_nodes, pingpong_model):
    n1, n2 = two_nodes
    bundle_hash = n1.deploy(bundle_to_bytes(link_bundle(pingpong_model)))
    iid = n1.create_instance(
        bundle_hash,
        {"clerk": "alice", "system": "bot"},
        placement={"B": "n2"},
    )
    task = n1.list_tasks("alice")[0]
    n1.complete_task(task.task_id, "ok")

    assert wait_until(lambda: n1.instance_report(iid)["status"] == "completed")
    events = n1.trace(iid)
    assert entered_trace(events, "A") == ["s0", "s1", "s2", "s3"]
    assert entered_trace(events, "B") == ["s0", "s1", "s2"]
    nodes_seen = {e["node"] for e in events}
    assert nodes_seen == {"n1", "n2"}
    # B's shard on n2 reached completion too.
    assert wait_until(lambda: n2.instance_report(iid)["status"] == "completed")


def test_placement_transparency_order_process(two_nodes, order_model, tmp_path):
    n1, n2 = two_nodes
    bundle_bytes = bundle_to_bytes(link_bundle(order_model))
    bindings = {"customer": "carol", "handler": "hank", "warehouse": "wes"}

    def drive(node, iid, peers):
        def step():
            if node.instance_report(iid)["status"] != "running":
                return True
            for engine in peers:
                for task in engine.all_open_tasks():
                    if task.instance_id != iid:
                        continue
                    if task.subject == "Customer" and task.kind == "choose_outcome":
                        engine.complete_task(task.task_id, "ok")
                    elif task.subject == "Customer" and task.kind == "provide_send_payload":
                        engine.complete_task(task.task_id, "order", payload={"item": "w", "qty": 2})
                    elif task.subject == "Shipment":
                        engine.complete_task(task.task_id, "packed")
                    elif task.subject == "OrderHandling" and task.state_id == "o1":
                        engine.complete_task(task.task_id, "in_stock")
                    elif task.subject == "OrderHandling" and task.state_id == "o4":
                        engine.complete_task(task.task_id, "done")
            return node.instance_report(iid)["status"] != "running"

        assert wait_until(step), "order process stalled"

    local_hash = n1.deploy(bundle_bytes)
    local_iid = n1.create_instance(local_hash, bindings)
    drive(n1, local_iid, [n1])
    local_events = n1.trace(local_iid)

    split_iid = n1.create_instance(
        local_hash, bindings, placement={"Shipment": "n2", "OrderHandling": "n2"}
    )
    drive(n1, split_iid, [n1, n2])
    split_events = n1.trace(split_iid)

    for subject in ("Customer", "OrderHandling", "Shipment"):
        assert entered_trace(local_events, subject) == entered_trace(split_events, subject), subject
    assert n1.instance_report(split_iid)["status"] == "completed"


def test_per_sender_fifo_across_nodes_under_backpressure(two_nodes):
    n1, n2 = two_nodes
    total = 300
    m = b.model(
        "stream",
        [b.subject("S"), b.subject("R", pool=4)],
        [b.message("m", "S", "R")],
        [
            b.behavior(
                "S",
                [b.fn("s0", start=True), b.send("s1"), b.fn("s2", end=True)],
                [b.outcome("s0", "s1", "more"), b.outcome("s0", "s2", "done"),
                 b.emits("s1", "s0", "m", "R")],
            ),
            b.behavior(
                "R",
                [b.recv("r0", start=True, timeout_ms=2000), b.fn("r1", end=True)],
                [b.matches("r0", "r0", "m", "S"), b.timeout("r0", "r1")],
            ),
        ],
    )
    bundle_hash = n1.deploy(bundle_to_bytes(link_bundle(m)))
    iid = n1.create_instance(bundle_hash, {"worker": "w"}, placement={"R": "n2"})

    sent = 0
    while sent < total:
        assert wait_until(lambda: n1.list_tasks("w")), f"no task after {sent} sends"
        task = n1.list_tasks("w")[0]
        n1.complete_task(task.task_id, "more")
        sent += 1
    assert wait_until(lambda: n1.list_tasks("w"))
    n1.complete_task(n1.list_tasks("w")[0].task_id, "done")

    assert wait_until(lambda: n1.instance_report(iid)["status"] == "completed", timeout_s=30.0)
    events = n1.trace(iid)
    delivered = [
        e["data"]["envelope"]["seq"]
        for e in events
        if e["kind"] == ev.MSG_DELIVERED and e["data"]["envelope"]["to"] == "R"
    ]
    assert delivered == sorted(delivered)
    assert delivered == list(range(1, total + 1))
    consumed = [
        e["data"]["envelope"]["seq"]
        for e in events
        if e["kind"] == ev.MSG_CONSUMED and e["subject"] == "R"
    ]
    assert consumed == list(range(1, total + 1))
