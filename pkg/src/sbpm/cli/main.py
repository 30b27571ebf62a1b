"""Operator commands tying the pipeline together.

Exit codes: 0 success; 1 errors (parse/validation/unsound/failed run);
2 inconclusive verification under --strict; 3 scenario run stalled.
"""

from __future__ import annotations

import json
import signal
import sys
import tempfile
import time
import urllib.request
from datetime import datetime, timezone
from pathlib import Path

import click
import yaml

from sbpm.cli.scenario import ScenarioDriver, ScenarioError, check_scenario, load_scenario
from sbpm.compiler import (
    BundleError,
    bundle_to_bytes,
    disassemble,
    link_bundle,
    load_bundle,
)
from sbpm.engine import EngineConfig, EngineNode, EngineServer
from sbpm.model import ParseError, parse_model
from sbpm.validate import (
    INCONCLUSIVE,
    UNSOUND,
    ValidateOptions,
    has_errors,
    report_to_json,
    validate,
)

EXIT_OK = 0
EXIT_ERRORS = 1
EXIT_INCONCLUSIVE = 2
EXIT_STALLED = 3


@click.group()
@click.version_option(package_name="sbpm")
def main() -> None:
    """Compile and run subject-oriented process models."""


@main.command("validate")
@click.argument("model_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--pool-bound", default=1, show_default=True, help="Pool bound for soundness exploration.")
@click.option("--cap", "state_cap", default=1_000_000, show_default=True, help="Product-state exploration cap.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("--strict", is_flag=True, help="Exit 2 when the soundness verdict is inconclusive.")
def cmd_validate(model_dir: str, pool_bound: int, state_cap: int, fmt: str, strict: bool) -> None:
    """Check a model directory: structure, interfaces, bounded soundness."""
    try:
        model = parse_model(model_dir)
    except ParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_ERRORS)

    diagnostics, report = validate(model, ValidateOptions(pool_bound=pool_bound, state_cap=state_cap))
    if fmt == "json":
        click.echo(json.dumps(report_to_json(diagnostics, report), indent=2))
    else:
        for d in diagnostics:
            click.echo(f"{d.severity:<7} {d.code}  {d.location[0]}#{d.location[1]}: {d.message}")
        click.echo(f"soundness: {report.verdict} (explored {report.explored} states, bound {report.bound})")
        if report.counterexample is not None:
            click.echo("counterexample:")
            for step in report.counterexample:
                click.echo(f"  - {step.to_json()}")
            if report.deadlock is not None:
                click.echo(f"deadlocked at: {json.dumps(report.deadlock.to_json())}")

    if has_errors(diagnostics) or report.verdict == UNSOUND:
        sys.exit(EXIT_ERRORS)
    if strict and report.verdict == INCONCLUSIVE:
        sys.exit(EXIT_INCONCLUSIVE)
    sys.exit(EXIT_OK)


@main.command("compile")
@click.argument("model_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None,
              help="Output bundle path (default <process-id>.sbpmb).")
@click.option("--stamp", is_flag=True, help="Stamp the real build time instead of the fixed epoch.")
@click.option("--pool-bound", default=1, show_default=True)
def cmd_compile(model_dir: str, output: "str | None", stamp: bool, pool_bound: int) -> None:
    """Validate and compile a model directory into a .sbpmb bundle."""
    try:
        model = parse_model(model_dir)
    except ParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_ERRORS)

    diagnostics, report = validate(model, ValidateOptions(pool_bound=pool_bound))
    for d in diagnostics:
        if d.severity != "info":
            click.echo(f"{d.severity:<7} {d.code}  {d.location[0]}#{d.location[1]}: {d.message}", err=True)
    if has_errors(diagnostics) or report.verdict == UNSOUND:
        click.echo("model is invalid; no bundle written", err=True)
        sys.exit(EXIT_ERRORS)

    created_at = (
        datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ") if stamp else "1970-01-01T00:00:00Z"
    )
    bundle = link_bundle(model, created_at=created_at)
    out_path = Path(output) if output else Path(f"{model.id}.sbpmb")
    out_path.write_bytes(bundle_to_bytes(bundle))
    click.echo(f"wrote {out_path} ({bundle.manifest.content_hash[:12]})")
    sys.exit(EXIT_OK)


@main.command("disasm")
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
def cmd_disasm(bundle_path: str) -> None:
    """Print a human-readable listing of a bundle."""
    try:
        bundle = load_bundle(bundle_path)
        click.echo(disassemble(bundle), nl=False)
    except BundleError as exc:
        click.echo(f"bad bundle: {exc}", err=True)
        sys.exit(EXIT_ERRORS)
    sys.exit(EXIT_OK)


@main.command("serve")
@click.option("--listen", default=None, help="HTTP host:port (wire = port+1); default $SBPM_LISTEN or 127.0.0.1:7420.")
@click.option("--node-id", default=None, help="Node identity (default $SBPM_NODE_ID or node-<port>).")
@click.option("--data-dir", type=click.Path(file_okay=False), default=None,
              help="Data directory (default $SBPM_DATA_DIR or ~/.sbpm/<node-id>).")
@click.option("--join", "joins", multiple=True, help="Peer engine host:port to register with (repeatable).")
def cmd_serve(listen: "str | None", node_id: "str | None", data_dir: "str | None", joins: tuple) -> None:
    """Run an engine node until interrupted."""
    import os

    listen = listen or os.environ.get("SBPM_LISTEN") or "127.0.0.1:7420"
    host, port = _parse_hostport(listen)
    node_id = node_id or os.environ.get("SBPM_NODE_ID") or f"node-{port}"
    data_dir = data_dir or os.environ.get("SBPM_DATA_DIR") or str(Path.home() / ".sbpm" / node_id)
    node = EngineNode(EngineConfig(data_dir=Path(data_dir), node_id=node_id, host=host, http_port=port))
    server = EngineServer(node, host=host, port=port).start()
    click.echo(f"node {node_id} listening on http://{host}:{server.port} (wire {node.wire_port})")

    for peer in joins:
        _join_peer(node, server, peer)

    stop = {"flag": False}

    def _sigint(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, _sigint)
    signal.signal(signal.SIGTERM, _sigint)
    try:
        while not stop["flag"]:
            time.sleep(0.2)
    finally:
        server.close()
        node.close()


def _parse_hostport(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


def _join_peer(node: EngineNode, server: EngineServer, peer: str, wait_s: float = 15.0) -> None:
    host, port = _parse_hostport(peer)
    base = f"http://{host}:{port}"
    deadline = time.monotonic() + wait_s
    while True:
        try:
            with urllib.request.urlopen(f"{base}/health", timeout=2) as response:
                peer_id = json.loads(response.read().decode())["node_id"]
            break
        except OSError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(0.2)  # peer still coming up
    node.register_node(peer_id, host, port)
    body = json.dumps(
        {"node_id": node.node_id, "host": server.host, "port": server.port, "wire_port": node.wire_port}
    ).encode()
    request = urllib.request.Request(
        f"{base}/nodes/register", data=body, headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(request, timeout=10):
        pass
    click.echo(f"joined {peer_id} at {base}")


@main.command("run")
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="YAML/JSON scenario script (per-subject task answers).")
@click.option("--bindings", "bindings_json", default=None,
              help="JSON role->agent map; unbound roles get stub agents.")
@click.option("--placement", "placement_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML/JSON subject->node-id map for distributed runs.")
@click.option("--join", "joins", multiple=True, help="Peer engine host:port hosting remote subjects.")
@click.option("--max-idle-ms", default=None, type=int, help="Exit 3 if nothing progresses for this long.")
@click.option("--on-full", type=click.Choice(["block", "drop-error"]), default="block", show_default=True)
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None,
              help="Also write the merged event trace as JSON.")
def cmd_run(bundle_path: str, scenario_path: str, bindings_json: "str | None",
            placement_path: "str | None", joins: tuple, max_idle_ms: "int | None",
            on_full: str, trace_out: "str | None") -> None:
    """Run one instance of a bundle against a scenario script."""
    try:
        bundle = load_bundle(bundle_path)
    except BundleError as exc:
        click.echo(f"bad bundle: {exc}", err=True)
        sys.exit(EXIT_ERRORS)

    try:
        scenario = load_scenario(scenario_path)
        check_scenario(scenario, bundle)
    except ScenarioError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(EXIT_ERRORS)

    placement = {}
    if placement_path:
        placement = yaml.safe_load(Path(placement_path).read_text(encoding="utf-8")) or {}

    bindings = {role: f"agent:{role}" for _, role in bundle.roles if role}
    if bindings_json:
        bindings.update(json.loads(bindings_json))

    with tempfile.TemporaryDirectory(prefix="sbpm-run-") as tmp:
        node = EngineNode(EngineConfig(data_dir=Path(tmp), node_id="local", on_full=on_full))
        server = EngineServer(node, port=0).start()
        remote_urls = []
        try:
            for peer in joins:
                _join_peer(node, server, peer)
                host, port = _parse_hostport(peer)
                remote_urls.append(f"http://{host}:{port}")

            bundle_hash = node.deploy(bundle_to_bytes(bundle))
            instance_id = node.create_instance(bundle_hash, bindings, placement=placement)
            driver = ScenarioDriver(node, scenario, bundle, instance_id, remote_urls=remote_urls)
            try:
                status = driver.run(max_idle_ms=max_idle_ms)
            except Exception as exc:
                click.echo(f"scenario run failed: {exc}", err=True)
                sys.exit(EXIT_ERRORS)

            events = node.trace(instance_id)
            for e in events:
                data = json.dumps(e["data"], sort_keys=True)
                click.echo(f"{e['ts']} {e['node']:<8} {e['subject']:<16} {e['kind']:<18} {data}")
            if trace_out:
                Path(trace_out).write_text(json.dumps({"instance_id": instance_id, "status": status,
                                                       "events": events}, indent=2), encoding="utf-8")
            click.echo(f"instance {instance_id}: {status}")
            if status == "completed":
                sys.exit(EXIT_OK)
            if status == "stalled":
                for subject, entries in scenario.pending().items():
                    click.echo(f"pending scenario entries for {subject}: {[e.at for e in entries]}", err=True)
                for task in node.all_open_tasks():
                    click.echo(f"open task: {task.subject} at {task.state_id} ({task.state_name}) "
                               f"options={task.options}", err=True)
                sys.exit(EXIT_STALLED)
            sys.exit(EXIT_ERRORS)
        finally:
            server.close()
            node.close()


if __name__ == "__main__":
    main()
