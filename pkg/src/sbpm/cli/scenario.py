"""Scenario scripts: per-subject lists of {at, outcome, payload} consumed in
order. A scenario doubles as the agent stub for machine subjects when a run
has no human in the loop.
"""

from __future__ import annotations

import json
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from sbpm.compiler import Bundle


class ScenarioError(Exception):
    pass


@dataclass
class ScenarioEntry:
    at: str
    outcome: str
    payload: "dict | None" = None


@dataclass
class Scenario:
    entries: dict[str, list[ScenarioEntry]] = field(default_factory=dict)

    def next_for(self, subject: str) -> "ScenarioEntry | None":
        queue = self.entries.get(subject)
        return queue[0] if queue else None

    def consume(self, subject: str) -> None:
        self.entries[subject].pop(0)

    def pending(self) -> dict[str, list[ScenarioEntry]]:
        return {s: list(q) for s, q in self.entries.items() if q}


def load_scenario(path: "Path | str") -> Scenario:
    raw = Path(path).read_text(encoding="utf-8")
    doc = yaml.safe_load(raw)
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must map subject ids to entry lists")
    entries: dict[str, list[ScenarioEntry]] = {}
    for subject, items in doc.items():
        if not isinstance(items, list):
            raise ScenarioError(f"scenario for {subject!r} must be a list")
        queue = []
        for i, item in enumerate(items):
            if not isinstance(item, dict) or "at" not in item or "outcome" not in item:
                raise ScenarioError(f"scenario entry {subject}[{i}] needs 'at' and 'outcome'")
            queue.append(ScenarioEntry(at=item["at"], outcome=item["outcome"], payload=item.get("payload")))
        entries[subject] = queue
    return Scenario(entries=entries)


def check_scenario(scenario: Scenario, bundle: Bundle) -> None:
    """Reject unknown subjects/states before any step executes."""
    for subject, queue in scenario.entries.items():
        try:
            program = bundle.program(subject)
        except KeyError:
            raise ScenarioError(f"scenario references unknown subject {subject!r}") from None
        names = {s.name for s in program.states} | {s.id for s in program.states}
        for entry in queue:
            if entry.at not in names:
                raise ScenarioError(
                    f"scenario references unknown state {entry.at!r} of subject {subject!r}"
                )


class ScenarioDriver:
    """Feeds scenario entries into open tasks across one or more engine nodes."""

    def __init__(self, node, scenario: Scenario, bundle: Bundle, instance_id: str,
                 remote_urls: "list[str] | None" = None):
        self.node = node
        self.scenario = scenario
        self.bundle = bundle
        self.instance_id = instance_id
        self.remote_urls = remote_urls or []

    def _state_matches(self, subject: str, task_state_id: str, task_state_name: str, at: str) -> bool:
        return at in (task_state_id, task_state_name)

    def step(self) -> bool:
        """Complete every currently matching task; True if anything progressed."""
        progressed = False
        for task in self.node.all_open_tasks():
            if task.instance_id != self.instance_id:
                continue
            entry = self.scenario.next_for(task.subject)
            if entry and self._state_matches(task.subject, task.state_id, task.state_name, entry.at):
                self.node.complete_task(task.task_id, entry.outcome, entry.payload)
                self.scenario.consume(task.subject)
                progressed = True
        for base in self.remote_urls:
            for task in self._remote_tasks(base):
                if task["instance_id"] != self.instance_id:
                    continue
                subject = task["subject"]
                entry = self.scenario.next_for(subject)
                if entry and self._state_matches(subject, task["state"]["id"], task["state"]["name"], entry.at):
                    self._remote_complete(base, task["task_id"], entry)
                    self.scenario.consume(subject)
                    progressed = True
        return progressed

    def _remote_tasks(self, base: str) -> list[dict]:
        tasks: list[dict] = []
        for subject in list(self.scenario.entries):
            role = self.bundle.role_of(subject) if subject in self.bundle.subject_ids() else None
            if role is None:
                continue
            agent = None
            record = self.node.get_record(self.instance_id)
            agent = record.bindings.get(role)
            if not agent:
                continue
            try:
                with urllib.request.urlopen(f"{base}/agents/{agent}/tasks", timeout=5) as response:
                    doc = json.loads(response.read().decode())
                tasks.extend(doc["tasks"])
            except OSError:
                continue
        # Deduplicate: one agent may cover several subjects.
        seen = set()
        unique = []
        for t in tasks:
            if t["task_id"] not in seen:
                seen.add(t["task_id"])
                unique.append(t)
        return unique

    def _remote_complete(self, base: str, task_id: str, entry: ScenarioEntry) -> None:
        body = json.dumps({"outcome": entry.outcome, "payload": entry.payload}).encode()
        request = urllib.request.Request(
            f"{base}/tasks/{task_id}/complete", data=body,
            headers={"Content-Type": "application/json"},
        )
        with urllib.request.urlopen(request, timeout=5):
            pass

    def run(self, max_idle_ms: "int | None" = None, poll_s: float = 0.01) -> str:
        """Drive until the instance leaves 'running'; 'stalled' on idle timeout.

        Progress = a scenario completion or local log growth; remote-only
        activity shows up through task completions or the local log anyway.
        """
        last_progress = time.monotonic()
        last_len = -1
        while True:
            record = self.node.get_record(self.instance_id)
            if record.shard.status != "running":
                return record.shard.status
            progressed = self.step()
            n = len(record.shard.log_records())
            if n != last_len:
                last_len = n
                progressed = True
            if progressed:
                last_progress = time.monotonic()
            elif max_idle_ms is not None and (time.monotonic() - last_progress) * 1000 > max_idle_ms:
                return "stalled"
            time.sleep(poll_s)
