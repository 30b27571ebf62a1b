from __future__ import annotations

import json
import urllib.error
import urllib.request

import pytest

from sbpm.compiler import bundle_to_bytes, link_bundle
from sbpm.engine import EngineConfig, EngineNode, EngineServer


@pytest.fixture
def server(tmp_path):
    node = EngineNode(EngineConfig(data_dir=tmp_path / "data", node_id="n1"))
    srv = EngineServer(node, port=0).start()
    yield srv
    srv.close()
    node.close()


def _request(server, method, path, body=None, raw=None):
    url = f"http://127.0.0.1:{server.port}{path}"
    data = None
    headers = {}
    if raw is not None:
        data = raw
        headers["Content-Type"] = "application/octet-stream"
    elif body is not None:
        data = json.dumps(body).encode()
        headers["Content-Type"] = "application/json"
    request = urllib.request.Request(url, data=data, headers=headers, method=method)
    with urllib.request.urlopen(request, timeout=10) as response:
        return response.status, json.loads(response.read().decode())


def _error(server, method, path, body=None):
    try:
        _request(server, method, path, body)
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read().decode())
    raise AssertionError("expected an HTTP error")


def test_full_worklist_flow(server, pingpong_model):
    data = bundle_to_bytes(link_bundle(pingpong_model))
    status, doc = _request(server, "POST", "/bundles", raw=data)
    assert status == 200
    bundle_hash = doc["hash"]

    status, doc = _request(server, "POST", "/bundles", raw=data)
    assert doc["hash"] == bundle_hash  # idempotent redeploy

    status, doc = _request(server, "GET", "/bundles")
    assert len(doc["bundles"]) == 1
    assert doc["bundles"][0]["process"] == "pingpong"

    status, doc = _request(
        server, "POST", "/instances",
        body={"hash": bundle_hash, "bindings": {"clerk": "alice", "system": "bot"}},
    )
    iid = doc["instance_id"]

    status, doc = _request(server, "GET", f"/agents/alice/tasks")
    assert len(doc["tasks"]) == 1
    task = doc["tasks"][0]
    assert task["subject"] == "A"
    assert task["options"] == ["ok"]

    status, doc = _request(server, "POST", f"/tasks/{task['task_id']}/complete", body={"outcome": "ok"})
    assert status == 200

    status, doc = _request(server, "GET", f"/instances/{iid}")
    assert doc["status"] == "completed"
    assert doc["metrics"]["instance_duration_ms"] is not None

    status, doc = _request(server, "GET", f"/instances/{iid}/trace")
    kinds = [e["kind"] for e in doc["events"]]
    assert kinds[-1] == "INSTANCE_COMPLETED"
    assert "CHOICE_MADE" in kinds

    status, doc = _request(server, "GET", "/agents/alice/tasks")
    assert doc["tasks"] == []


def test_error_mapping(server, pingpong_model):
    code, doc = _error(server, "GET", "/instances/nope")
    assert code == 404 and doc["code"] == "UnknownInstance"

    code, doc = _error(server, "POST", "/instances", body={"hash": "0" * 64})
    assert code == 404 and doc["code"] == "UnknownBundle"

    code, doc = _error(server, "POST", "/tasks/ghost/complete", body={"outcome": "x"})
    assert code == 410 and doc["code"] == "TaskGone"

    code, doc = _error(server, "POST", "/bundles")
    assert code == 400 and doc["code"] == "MalformedBundle"

    data = bundle_to_bytes(link_bundle(pingpong_model))
    _, doc = _request(server, "POST", "/bundles", raw=data)
    code, body = _error(server, "POST", "/instances", body={"hash": doc["hash"], "bindings": {}})
    assert code == 400 and body["code"] == "UnboundRole"

    _, doc2 = _request(
        server, "POST", "/instances",
        body={"hash": doc["hash"], "bindings": {"clerk": "alice", "system": "bot"}},
    )
    _, tasks = _request(server, "GET", "/agents/alice/tasks")
    task_id = tasks["tasks"][0]["task_id"]

    code, body = _error(server, "POST", f"/tasks/{task_id}/complete",
                        body={"outcome": "ok", "agent_id": "mallory"})
    assert code == 403 and body["code"] == "NotYourTask"

    code, body = _error(server, "POST", f"/tasks/{task_id}/complete", body={"outcome": "bogus"})
    assert code == 400 and body["code"] == "NoSuchOutcome"

    # Still completable after the bad attempts.
    status, _ = _request(server, "POST", f"/tasks/{task_id}/complete",
                         body={"outcome": "ok", "agent_id": "alice"})
    assert status == 200

    code, body = _error(server, "POST", f"/tasks/{task_id}/complete", body={"outcome": "ok"})
    assert code == 410 and body["code"] == "TaskGone"


def test_node_registry(server):
    status, doc = _request(server, "POST", "/nodes/register",
                           body={"node_id": "n2", "host": "127.0.0.1", "port": 9999})
    assert status == 200
    status, doc = _request(server, "GET", "/nodes")
    ids = [n["node_id"] for n in doc["nodes"]]
    assert "n2" in ids and "n1" in ids
    n2 = next(n for n in doc["nodes"] if n["node_id"] == "n2")
    assert n2["wire_port"] == 10000  # HTTP port + 1 convention
    assert n2["status"] == "up"


def test_health(server):
    status, doc = _request(server, "GET", "/health")
    assert status == 200
    assert doc["node_id"] == "n1"
