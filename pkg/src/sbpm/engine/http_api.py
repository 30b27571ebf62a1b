"""REST surface over an EngineNode: stdlib threading HTTP server, JSON bodies.

Errors map to 4xx responses carrying {code, message} where code is the
operation error name (UnknownBundle, TaskGone, PayloadInvalid, ...).
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from sbpm.compiler.bundle import BundleError
from sbpm.engine.errors import EngineError, NotYourTask, TaskGone, UnknownBundle, UnknownInstance
from sbpm.engine.service import EngineNode
from sbpm.runtime import (
    InstanceNotRunning,
    NoSuchOutcome,
    PayloadInvalid,
    UnboundRole,
    UnknownNode,
    UnknownTarget,
)

_STATUS = {
    "UnknownBundle": 404,
    "UnknownInstance": 404,
    "UnknownNode": 404,
    "UnknownTarget": 404,
    "TaskGone": 410,
    "NotYourTask": 403,
    "InstanceNotRunning": 409,
}


def _error_code(exc: Exception) -> tuple[int, str]:
    name = type(exc).__name__
    return _STATUS.get(name, 400), name


class _Handler(BaseHTTPRequestHandler):
    node: EngineNode  # injected by serve()

    protocol_version = "HTTP/1.1"

    # Route table: (method, compiled pattern, handler name)
    ROUTES = [
        ("GET", re.compile(r"^/health$"), "health"),
        ("POST", re.compile(r"^/bundles$"), "post_bundle"),
        ("GET", re.compile(r"^/bundles$"), "get_bundles"),
        ("POST", re.compile(r"^/instances$"), "post_instance"),
        ("GET", re.compile(r"^/instances$"), "get_instances"),
        ("GET", re.compile(r"^/instances/(?P<iid>[^/]+)$"), "get_instance"),
        ("GET", re.compile(r"^/instances/(?P<iid>[^/]+)/trace$"), "get_trace"),
        ("GET", re.compile(r"^/agents/(?P<aid>[^/]+)/tasks$"), "get_tasks"),
        ("POST", re.compile(r"^/tasks/(?P<tid>[^/]+)/complete$"), "post_complete"),
        ("POST", re.compile(r"^/nodes/register$"), "post_node"),
        ("GET", re.compile(r"^/nodes$"), "get_nodes"),
        ("POST", re.compile(r"^/internal/instances$"), "post_internal_instance"),
        ("POST", re.compile(r"^/internal/instances/(?P<iid>[^/]+)/halted$"), "post_halted"),
        ("POST", re.compile(r"^/internal/instances/(?P<iid>[^/]+)/finalize$"), "post_finalize"),
        ("GET", re.compile(r"^/internal/instances/(?P<iid>[^/]+)/events$"), "get_events"),
    ]

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _dispatch(self, method: str) -> None:
        path = self.path.split("?", 1)[0]
        for route_method, pattern, name in self.ROUTES:
            if route_method != method:
                continue
            match = pattern.match(path)
            if match:
                try:
                    getattr(self, name)(**match.groupdict())
                except (
                    EngineError,
                    BundleError,
                    UnknownNode,
                    UnknownTarget,
                    UnboundRole,
                    NoSuchOutcome,
                    PayloadInvalid,
                    InstanceNotRunning,
                    ValueError,
                    KeyError,
                ) as exc:
                    status, code = _error_code(exc)
                    self._send(status, {"code": code, "message": str(exc)})
                return
        self._send(404, {"code": "NotFound", "message": f"no route for {method} {path}"})

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    # ----------------------------------------------------------- helpers

    def _body_bytes(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _body_json(self) -> dict:
        raw = self._body_bytes()
        if not raw:
            return {}
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        return doc

    def _send(self, status: int, doc: dict) -> None:
        data = json.dumps(doc).encode("utf-8")
        try:
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(data)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client went away; nothing to salvage

    # ------------------------------------------------------------ routes

    def health(self) -> None:
        self._send(200, {"status": "ok", "node_id": self.node.node_id})

    def post_bundle(self) -> None:
        bundle_hash = self.node.deploy(self._body_bytes())
        self._send(200, {"hash": bundle_hash})

    def get_bundles(self) -> None:
        self._send(200, {"bundles": self.node.list_bundles()})

    def post_instance(self) -> None:
        body = self._body_json()
        if "hash" not in body:
            raise ValueError("missing field: hash")
        instance_id = self.node.create_instance(
            body["hash"],
            bindings=body.get("bindings") or {},
            placement=body.get("placement") or {},
            on_full=body.get("on_full"),
            external_routes=body.get("external_routes"),
        )
        self._send(200, {"instance_id": instance_id})

    def get_instances(self) -> None:
        self._send(200, {"instances": self.node.list_instances()})

    def get_instance(self, iid: str) -> None:
        self._send(200, self.node.instance_report(iid))

    def get_trace(self, iid: str) -> None:
        self._send(200, {"events": self.node.trace(iid)})

    def get_tasks(self, aid: str) -> None:
        self._send(200, {"tasks": [t.to_json() for t in self.node.list_tasks(aid)]})

    def post_complete(self, tid: str) -> None:
        body = self._body_json()
        if "outcome" not in body:
            raise ValueError("missing field: outcome")
        self.node.complete_task(
            tid, body["outcome"], payload=body.get("payload"), agent_id=body.get("agent_id")
        )
        self._send(200, {"completed": tid})

    def post_node(self) -> None:
        body = self._body_json()
        for field in ("node_id", "host", "port"):
            if field not in body:
                raise ValueError(f"missing field: {field}")
        self.node.register_node(
            body["node_id"], body["host"], int(body["port"]), wire_port=body.get("wire_port")
        )
        self._send(200, {"registered": body["node_id"]})

    def get_nodes(self) -> None:
        self._send(200, {"nodes": self.node.list_nodes()})

    def post_internal_instance(self) -> None:
        self.node.start_remote_shard(self._body_json())
        self._send(200, {})

    def post_halted(self, iid: str) -> None:
        body = self._body_json()
        self.node.note_remote_halt(iid, body["subject"])
        self._send(200, {})

    def post_finalize(self, iid: str) -> None:
        body = self._body_json()
        self.node.finalize_shard(iid, body.get("status", "completed"))
        self._send(200, {})

    def get_events(self, iid: str) -> None:
        self._send(200, {"events": self.node.local_events(iid)})


class EngineServer:
    """HTTP front for one EngineNode, running on a daemon thread."""

    def __init__(self, node: EngineNode, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"node": node})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self.host, self.port = self.httpd.server_address[0], self.httpd.server_address[1]
        node.http_url = f"http://{self.host}:{self.port}"
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True, name=f"http-{node.node_id}")

    def start(self) -> "EngineServer":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
