"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
output. Tolerances and budgets are pinned here, not configurable.
"""

from __future__ import annotations

import json
import random
import socket
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request
from dataclasses import replace
from pathlib import Path

import pytest
from click.testing import CliRunner

import builders as b
from interp import AWAITING_ACK, AWAITING_OUTCOME, AWAITING_SEND_CHOICE, HALTED, GraphInterpreter
from modelgen import generate_model
from oracle_soundness import oracle_soundness
from sbpm.cli.main import main as cli_main
from sbpm.compiler import bundle_to_bytes, link_bundle
from sbpm.engine import EngineConfig, EngineNode, EngineServer
from sbpm.model import parse_model, serialize_model
from sbpm.runtime import (
    BLOCKED_SEND,
    ON_FULL_DROP_ERROR,
    STATUS_COMPLETED,
    STATUS_FAILED,
    InstanceShard,
    MessageAvailable,
    SendAck,
    TaskCompleted,
    actor_start,
    actor_step,
    bare_actor,
    checkpoint_replay,
    make_envelope,
    resume_instance,
    start_instance,
)
from sbpm.runtime import events as ev
from sbpm.validate import UNSOUND, check_soundness, replay_counterexample
from test_runtime_instance import RecordingSink, _backpressure_model

FIXTURES = Path(__file__).parent / "fixtures"


def _passed(name: str, detail: str = "") -> None:
    print(f"\nACCEPTANCE {name}: PASS" + (f" ({detail})" if detail else ""))


def entered(events, subject):
    return [e["data"]["state"] for e in events if e["subject"] == subject and e["kind"] == ev.STATE_ENTERED]


# ---------------------------------------------------------------------------
# Criterion 1: parser round-trip fixpoint over >= 20 corpus models, < 5 s.


def test_acceptance_parser_roundtrip(pingpong_model, order_model):
    started = time.monotonic()
    corpus = [pingpong_model, order_model, _backpressure_model()]
    corpus += [generate_model(seed, with_schemas=True) for seed in range(100, 121)]
    assert len(corpus) >= 20

    for i, model in enumerate(corpus):
        files = serialize_model(model)
        once = parse_model(files)
        assert once == model, f"corpus model {i} not a fixpoint"
        again = parse_model(serialize_model(once))
        assert again == once, f"corpus model {i} unstable on second pass"
        assert serialize_model(once) == files, f"corpus model {i} serialization not deterministic"

    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"round-trip took {elapsed:.2f}s"
    _passed("parser-roundtrip", f"{len(corpus)} models in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 2: soundness verdicts match the independent oracle on >= 500
# random models; counterexamples replay to the reported deadlock; < 2 min.


def test_acceptance_soundness_oracle_equivalence():
    started = time.monotonic()
    checked = unsound_count = 0
    for seed in range(1000, 1500):
        pool_bound = 1 if seed % 2 == 0 else 2
        model = generate_model(seed, small_pools=True)
        report = check_soundness(model, pool_bound=pool_bound, state_cap=300_000)
        verdict, _ = oracle_soundness(model, pool_bound=pool_bound, state_cap=300_000)
        assert report.verdict == verdict, f"seed {seed} bound {pool_bound}: {report.verdict} != {verdict}"
        if report.verdict == UNSOUND:
            unsound_count += 1
            landed = replay_counterexample(model, report.counterexample, pool_bound=pool_bound)
            assert landed == report.deadlock, f"seed {seed}: counterexample does not replay"
        checked += 1
    elapsed = time.monotonic() - started
    assert checked >= 500
    assert elapsed < 120.0, f"oracle equivalence took {elapsed:.1f}s"
    _passed("soundness-oracle", f"{checked} models ({unsound_count} unsound) in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 3: byte-reproducible compilation; interpreted vs compiled
# bisimulation over >= 1000 random event sequences per fixture.


def _minimal_payload(bundle, schema_id):
    if schema_id is None:
        return None
    schema = bundle.schema(schema_id)

    def fill(fields):
        out = {}
        for f in fields:
            if not f.required:
                continue
            if f.type == "string":
                out[f.name] = "x"
            elif f.type == "number":
                out[f.name] = 1
            elif f.type == "boolean":
                out[f.name] = True
            elif f.type == "record":
                out[f.name] = fill(f.children)
            elif f.type == "list":
                out[f.name] = []
        return out

    return fill(schema.fields)


def test_acceptance_compile_determinism_and_bisimulation(pingpong_model, order_model):
    started = time.monotonic()
    for model in (pingpong_model, order_model):
        assert bundle_to_bytes(link_bundle(model)) == bundle_to_bytes(link_bundle(model))

    sequences = 0
    for model in (pingpong_model, order_model):
        bundle = link_bundle(model)
        for subject in model.behaviors:
            for seed in range(1000):
                _run_bisim_sequence(model, bundle, subject, seed)
                sequences += 1
    for seed in range(20):
        model = generate_model(7000 + seed)
        bundle = link_bundle(model)
        for subject in model.behaviors:
            for s in range(25):
                _run_bisim_sequence(model, bundle, subject, seed * 100 + s)
                sequences += 1
    elapsed = time.monotonic() - started
    _passed("compile-bisimulation", f"{sequences} sequences in {elapsed:.1f}s")


def _run_bisim_sequence(model, bundle, subject, seed, max_steps=60):
    from sbpm.runtime import TimeoutElapsed

    graph = model.behaviors[subject]
    rng = random.Random(seed)

    interp = GraphInterpreter(model, graph)
    actor, steps = actor_start(bundle, bare_actor(bundle, subject), "bisim")
    compiled = [e.state_id for _, e in steps if e.__class__.__name__ == "Entered"]
    assert compiled == interp.entered, f"{subject}: initial divergence {compiled} vs {interp.entered}"

    deliver_seq = 0
    for _ in range(max_steps):
        if interp.status == HALTED:
            break
        if interp.status == AWAITING_OUTCOME:
            options = [("outcome", o) for o in interp.outcomes()]
        elif interp.status == AWAITING_SEND_CHOICE:
            options = [("outcome", m) for m in interp.send_choices()]
        elif interp.status == AWAITING_ACK:
            options = [("ack",)]
        else:
            options = [("deliver", m, f) for m, f in interp.receivable()]
            if interp.timer_armed() and interp._match() is None:
                options.append(("timeout",))
        if not options:
            break
        event = rng.choice(options)
        got_i = interp.apply(event)

        if event[0] == "outcome":
            state = bundle.program(subject).state(actor.current)
            payload = None
            if state.kind == "send":
                arm = next(a for a in state.arms if getattr(a, "message", None) == event[1])
                payload = _minimal_payload(bundle, arm.bo)
            actor, steps = actor_step(bundle, actor, TaskCompleted(event[1], payload), "bisim")
        elif event[0] == "ack":
            actor, steps = actor_step(bundle, actor, SendAck(), "bisim")
        elif event[0] == "deliver":
            deliver_seq += 1
            env = make_envelope("bisim", event[2], subject, event[1], deliver_seq, {})
            actor = replace(actor, pool=actor.pool + (env,))
            actor, steps = actor_step(bundle, actor, MessageAvailable(), "bisim")
        else:
            actor, steps = actor_step(bundle, actor, TimeoutElapsed(actor.epoch), "bisim")

        got_c = [e.state_id for _, e in steps if e.__class__.__name__ == "Entered"]
        assert got_c == got_i, f"{subject} seed {seed}: divergence {got_c} vs {got_i} on {event}"


# ---------------------------------------------------------------------------
# Criterion 4: end-to-end cmd_run against golden traces, < 10 s.


def test_acceptance_end_to_end_golden_traces(tmp_path):
    started = time.monotonic()
    runner = CliRunner()
    for fixture in ("pingpong", "order"):
        bundle_path = tmp_path / f"{fixture}.sbpmb"
        trace_path = tmp_path / f"{fixture}-trace.json"
        result = runner.invoke(cli_main, ["compile", str(FIXTURES / fixture), "-o", str(bundle_path)])
        assert result.exit_code == 0, result.output
        result = runner.invoke(cli_main, [
            "run", str(bundle_path),
            "--scenario", str(FIXTURES / fixture / "scenario.yaml"),
            "--max-idle-ms", "5000",
            "--trace-out", str(trace_path),
        ])
        assert result.exit_code == 0, result.output

        golden = json.loads((FIXTURES / "golden" / f"{fixture}_trace.json").read_text())
        doc = json.loads(trace_path.read_text())
        assert doc["status"] == "completed"
        kinds = [e["kind"] for e in doc["events"]]
        for subject, states in golden["per_subject_states"].items():
            assert entered(doc["events"], subject) == states, subject
        for kind in golden["required_kinds"]:
            assert kind in kinds, kind
        if "timeout_subject" in golden:
            fired = [e for e in doc["events"] if e["kind"] == ev.TIMEOUT_FIRED]
            assert fired and fired[0]["subject"] == golden["timeout_subject"]
        assert kinds[-1] == ev.INSTANCE_COMPLETED
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"end-to-end took {elapsed:.1f}s"
    _passed("end-to-end-golden", f"2 fixtures in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 5: placement transparency (two cmd_serve processes) and
# per-sender FIFO over a 1000-message stress fixture.


def _free_port_pair():
    # Engine needs http_port and http_port+1 both free.
    for _ in range(50):
        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
        s.close()
        try:
            probe = socket.socket()
            probe.bind(("127.0.0.1", port + 1))
            probe.close()
            return port
        except OSError:
            continue
    raise RuntimeError("no free port pair")


def _http(method, url, body=None, raw=None, timeout=10):
    data = None
    headers = {}
    if raw is not None:
        data, headers = raw, {"Content-Type": "application/octet-stream"}
    elif body is not None:
        data, headers = json.dumps(body).encode(), {"Content-Type": "application/json"}
    request = urllib.request.Request(url, data=data, headers=headers, method=method)
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode())


def _wait_health(base, timeout_s=15.0):
    deadline = time.time() + timeout_s
    while time.time() < deadline:
        try:
            return _http("GET", f"{base}/health", timeout=2)
        except OSError:
            time.sleep(0.1)
    raise RuntimeError(f"{base} never became healthy")


@pytest.fixture
def serve_processes(tmp_path):
    procs = []
    bases = []
    try:
        ports = [_free_port_pair(), _free_port_pair()]
        if ports[1] in (ports[0], ports[0] + 1):
            ports[1] = _free_port_pair()
        for i, port in enumerate(ports, start=1):
            proc = subprocess.Popen(
                [sys.executable, "-m", "sbpm.cli.main", "serve",
                 "--listen", f"127.0.0.1:{port}",
                 "--node-id", f"accept-n{i}",
                 "--data-dir", str(tmp_path / f"n{i}")],
                stdout=subprocess.DEVNULL,
                stderr=subprocess.DEVNULL,
            )
            procs.append(proc)
            bases.append(f"http://127.0.0.1:{port}")
        for base in bases:
            _wait_health(base)
        # Cross-register.
        for me, other in ((0, 1), (1, 0)):
            my_port = int(bases[me].rsplit(":", 1)[1])
            _http("POST", f"{bases[other]}/nodes/register",
                  body={"node_id": f"accept-n{me + 1}", "host": "127.0.0.1", "port": my_port})
        yield bases
    finally:
        for proc in procs:
            proc.terminate()
        for proc in procs:
            try:
                proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                proc.kill()


def _drive_order_over_http(bases, iid, scenario_queues):
    deadline = time.time() + 30.0
    agents = {"customer": "carol", "handler": "hank", "warehouse": "wes"}
    while time.time() < deadline:
        report = _http("GET", f"{bases[0]}/instances/{iid}")
        if report["status"] != "running":
            return report["status"]
        for base in bases:
            for agent in agents.values():
                try:
                    tasks = _http("GET", f"{base}/agents/{agent}/tasks")["tasks"]
                except urllib.error.HTTPError:
                    continue
                for task in tasks:
                    if task["instance_id"] != iid:
                        continue
                    queue = scenario_queues.get(task["subject"], [])
                    if queue and task["state"]["name"] == queue[0]["at"]:
                        entry = queue.pop(0)
                        _http("POST", f"{base}/tasks/{task['task_id']}/complete",
                              body={"outcome": entry["outcome"], "payload": entry.get("payload")})
        time.sleep(0.02)
    return "timeout"


def test_acceptance_placement_transparency(serve_processes, tmp_path, order_model):
    bases = serve_processes
    runner = CliRunner()

    # All-local golden run via cmd_run.
    bundle_path = tmp_path / "order.sbpmb"
    trace_path = tmp_path / "order-local.json"
    assert runner.invoke(cli_main, ["compile", str(FIXTURES / "order"), "-o", str(bundle_path)]).exit_code == 0
    result = runner.invoke(cli_main, [
        "run", str(bundle_path), "--scenario", str(FIXTURES / "order" / "scenario.yaml"),
        "--max-idle-ms", "5000", "--trace-out", str(trace_path),
    ])
    assert result.exit_code == 0, result.output
    local_events = json.loads(trace_path.read_text())["events"]

    # Split run across the two serve processes.
    data = bundle_path.read_bytes()
    bundle_hash = _http("POST", f"{bases[0]}/bundles", raw=data)["hash"]
    iid = _http("POST", f"{bases[0]}/instances", body={
        "hash": bundle_hash,
        "bindings": {"customer": "carol", "handler": "hank", "warehouse": "wes"},
        "placement": {"OrderHandling": "accept-n2", "Shipment": "accept-n2"},
    })["instance_id"]

    scenario = {
        "Customer": [
            {"at": "fill order", "outcome": "ok"},
            {"at": "send order", "outcome": "order", "payload": {"item": "widget", "qty": 2}},
        ],
        "OrderHandling": [
            {"at": "check stock", "outcome": "in_stock"},
            {"at": "finalize", "outcome": "done"},
        ],
        "Shipment": [{"at": "pack", "outcome": "packed"}],
    }
    status = _drive_order_over_http(bases, iid, scenario)
    assert status == "completed", status

    split_events = _http("GET", f"{bases[0]}/instances/{iid}/trace")["events"]
    for subject in ("Customer", "OrderHandling", "Shipment"):
        assert entered(local_events, subject) == entered(split_events, subject), subject
    nodes = {e["node"] for e in split_events}
    assert nodes == {"accept-n1", "accept-n2"}
    _passed("placement-transparency", f"per-subject traces identical across {sorted(nodes)}")


def test_acceptance_per_sender_fifo_stress(tmp_path):
    started = time.monotonic()
    total = 1000
    n1 = EngineNode(EngineConfig(data_dir=tmp_path / "f1", node_id="f1"))
    n2 = EngineNode(EngineConfig(data_dir=tmp_path / "f2", node_id="f2"))
    s1 = EngineServer(n1, port=0).start()
    s2 = EngineServer(n2, port=0).start()
    try:
        n1.register_node("f2", "127.0.0.1", s2.port, wire_port=n2.wire_port)
        n2.register_node("f1", "127.0.0.1", s1.port, wire_port=n1.wire_port)
        m = b.model(
            "fifostress",
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
                    [b.recv("r0", start=True, timeout_ms=3000), b.fn("r1", end=True)],
                    [b.matches("r0", "r0", "m", "S"), b.timeout("r0", "r1")],
                ),
            ],
        )
        bundle_hash = n1.deploy(bundle_to_bytes(link_bundle(m)))
        iid = n1.create_instance(bundle_hash, {"worker": "w"}, placement={"R": "f2"})

        sent = 0
        deadline = time.time() + 55.0
        while sent < total and time.time() < deadline:
            tasks = n1.list_tasks("w")
            if not tasks:
                time.sleep(0.0005)
                continue
            n1.complete_task(tasks[0].task_id, "more")
            sent += 1
        assert sent == total, f"only {sent} sends before deadline"
        while True:
            tasks = n1.list_tasks("w")
            if tasks:
                n1.complete_task(tasks[0].task_id, "done")
                break
            time.sleep(0.0005)

        deadline = time.time() + 30.0
        while n1.instance_report(iid)["status"] == "running" and time.time() < deadline:
            time.sleep(0.02)
        assert n1.instance_report(iid)["status"] == STATUS_COMPLETED

        events = n1.trace(iid)
        delivered = [e["data"]["envelope"]["seq"] for e in events
                     if e["kind"] == ev.MSG_DELIVERED and e["data"]["envelope"]["to"] == "R"]
        assert delivered == list(range(1, total + 1)), "per-sender FIFO violated or messages lost"
        blocked = any(e["kind"] == ev.MSG_SENT for e in events)
        assert blocked
    finally:
        s1.close()
        s2.close()
        n1.close()
        n2.close()
    elapsed = time.monotonic() - started
    _passed("fifo-stress", f"{total} messages across 2 nodes in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 6: crash replay at every event index of a ping-pong run.


def test_acceptance_crash_replay_every_index(pingpong_model):
    bundle = link_bundle(pingpong_model)
    snapshots: list[dict] = []
    sink = RecordingSink()
    shard = InstanceShard(bundle, "crash-accept", bindings={"clerk": "a", "system": "b"}, sink=sink)
    shard._log.on_append = lambda record: snapshots.append(shard.state().core_view())
    shard.start()
    shard.complete_task("A", "ok")
    assert shard.status == STATUS_COMPLETED
    records = shard.log_records()
    golden = {s: entered([r.to_json() for r in records], s) for s in ("A", "B")}

    exact = resumed = 0
    for k in range(len(records) + 1):
        if k > 0:
            view = checkpoint_replay(records[:k], bundle)
            assert view.core_view() == snapshots[k - 1], f"inexact reconstruction at index {k}"
            exact += 1
        resume_sink = RecordingSink()
        live = resume_instance(bundle, "crash-accept", records[:k],
                               bindings={"clerk": "a", "system": "b"}, sink=resume_sink)
        for _ in range(4):
            if live.status == STATUS_COMPLETED:
                break
            need = resume_sink.tasks.get("A") or live.open_waits().get("A")
            assert need is not None, f"stalled resume at index {k}"
            live.complete_task("A", need.options[0])
        assert live.status == STATUS_COMPLETED, f"resume at index {k} did not complete"
        final = [r.to_json() for r in live.log_records()]
        for subject in ("A", "B"):
            assert entered(final, subject) == golden[subject], f"index {k} trace drift"
        resumed += 1

    assert exact == len(records)
    assert resumed == len(records) + 1
    _passed("crash-replay", f"{exact} exact reconstructions, {resumed} resumed runs")


# ---------------------------------------------------------------------------
# Criterion 7: backpressure without loss; drop-error fails the instance.


def test_acceptance_backpressure():
    bundle = link_bundle(_backpressure_model(cap=1))
    sink = RecordingSink()
    shard = start_instance(bundle, {"worker": "w"}, sink=sink)
    assert shard.state().actors["S"].status == BLOCKED_SEND
    shard.complete_task("R", "go")
    assert shard.status == STATUS_COMPLETED
    records = shard.log_records()
    sent = [r.data["envelope"]["seq"] for r in records if r.kind == ev.MSG_SENT]
    delivered = [r.data["envelope"]["seq"] for r in records if r.kind == ev.MSG_DELIVERED]
    consumed = [r.data["envelope"]["seq"] for r in records if r.kind == ev.MSG_CONSUMED]
    assert sent == [1, 2] and delivered == [1, 2] and consumed == [1, 2], "message loss or reorder"

    drop = start_instance(bundle, {"worker": "w"}, on_full=ON_FULL_DROP_ERROR)
    assert drop.status == STATUS_FAILED
    assert "PoolOverflow" in (drop.failure_reason or "")
    _passed("backpressure", "block mode lossless; drop-error failed with PoolOverflow")


# ---------------------------------------------------------------------------
# Criterion 8: throughput smoke, 1000 concurrent instances < 60 s.


def test_acceptance_throughput_smoke(tmp_path, pingpong_model):
    started = time.monotonic()
    count = 1000
    node = EngineNode(EngineConfig(data_dir=tmp_path / "thr", node_id="thr"))
    try:
        bundle_hash = node.deploy(bundle_to_bytes(link_bundle(pingpong_model)))

        ids: list[str] = []
        ids_lock = threading.Lock()

        def create(n):
            for _ in range(n):
                iid = node.create_instance(bundle_hash, {"clerk": "alice", "system": "bot"})
                with ids_lock:
                    ids.append(iid)

        workers = [threading.Thread(target=create, args=(count // 4,)) for _ in range(4)]
        for w in workers:
            w.start()
        for w in workers:
            w.join()
        assert len(ids) == count

        tasks = node.list_tasks("alice")
        assert len(tasks) == count  # all instances running concurrently

        def complete(chunk):
            for task in chunk:
                node.complete_task(task.task_id, "ok")

        quarters = [tasks[i::4] for i in range(4)]
        workers = [threading.Thread(target=complete, args=(q,)) for q in quarters]
        for w in workers:
            w.start()
        for w in workers:
            w.join()

        done = sum(1 for iid in ids if node.instance_report(iid)["status"] == STATUS_COMPLETED)
        assert done == count, f"{done}/{count} completed"
    finally:
        node.close()
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"throughput smoke took {elapsed:.1f}s"
    _passed("throughput-smoke", f"{count} instances in {elapsed:.1f}s")
