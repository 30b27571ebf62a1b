// Instance trace view: one swimlane per subject, populated from the merged
// event log. The server is the source of truth; this view only reads.

import { EngineApiError, EngineClient } from "./api.js";
import type { InstanceReport, TraceEvent } from "./types.js";

const LANE_KINDS = new Set([
  "STATE_ENTERED",
  "MSG_SENT",
  "MSG_DELIVERED",
  "MSG_CONSUMED",
  "CHOICE_MADE",
  "TIMEOUT_FIRED",
  "CRASHED",
  "RESTARTED",
  "SUBJECT_HALTED",
]);

export interface TraceOptions {
  pollMs?: number;
}

export class TraceView {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private root: HTMLElement,
    private client: EngineClient,
    public instanceId: string,
    private options: TraceOptions = {},
  ) {}

  start(): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.options.pollMs ?? 2000);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async refresh(): Promise<void> {
    try {
      const [events, report] = await Promise.all([
        this.client.getTrace(this.instanceId),
        this.client.getInstance(this.instanceId),
      ]);
      this.render(events, report);
    } catch (error) {
      if (error instanceof EngineApiError && error.status === 404) {
        this.renderNotFound();
        this.stop();
      }
      // other failures: keep the last good render and retry on the next poll
    }
  }

  renderNotFound(): void {
    this.root.textContent = "";
    const box = document.createElement("div");
    box.className = "not-found";
    box.textContent = `no such instance: ${this.instanceId}`;
    this.root.appendChild(box);
  }

  render(events: TraceEvent[], report: InstanceReport): void {
    this.root.textContent = "";
    const heading = document.createElement("h2");
    heading.textContent = `Instance ${this.instanceId.slice(0, 8)} · ${report.status}`;
    heading.className = `status-${report.status}`;
    this.root.appendChild(heading);

    const subjects = [...new Set(events.filter((e) => e.subject !== "SUPERVISOR").map((e) => e.subject))].sort();
    const lanes = document.createElement("div");
    lanes.className = "swimlanes";

    for (const subject of subjects) {
      const lane = document.createElement("div");
      lane.className = "lane";
      lane.dataset.subject = subject;
      const title = document.createElement("h3");
      title.textContent = subject;
      lane.appendChild(title);

      for (const event of events) {
        if (event.subject !== subject || !LANE_KINDS.has(event.kind)) continue;
        const chip = document.createElement("div");
        chip.className = `chip chip-${event.kind.toLowerCase()}`;
        chip.textContent = describe(event);
        if (report.status === "running" && event.kind === "STATE_ENTERED" && isLastEntry(events, event)) {
          chip.classList.add("current");
        }
        lane.appendChild(chip);
      }
      lanes.appendChild(lane);
    }
    this.root.appendChild(lanes);

    if (events.some((e) => e.kind === "INSTANCE_COMPLETED")) {
      const terminator = document.createElement("div");
      terminator.className = "terminator";
      terminator.textContent = "INSTANCE_COMPLETED";
      this.root.appendChild(terminator);
    }
  }
}

function isLastEntry(events: TraceEvent[], event: TraceEvent): boolean {
  for (let i = events.length - 1; i >= 0; i--) {
    const e = events[i];
    if (e.subject === event.subject && e.kind === "STATE_ENTERED") {
      return e === event;
    }
  }
  return false;
}

function describe(event: TraceEvent): string {
  const data = event.data as Record<string, any>;
  switch (event.kind) {
    case "STATE_ENTERED":
      return `→ ${data.state} (${data.kind})`;
    case "MSG_SENT":
      return `sent ${data.envelope.message} → ${data.envelope.to}`;
    case "MSG_DELIVERED":
      return `got ${data.envelope.message} ← ${data.envelope.from}`;
    case "MSG_CONSUMED":
      return `consumed ${data.envelope.message}`;
    case "CHOICE_MADE":
      return `chose ${data.outcome}`;
    case "TIMEOUT_FIRED":
      return `timeout at ${data.state}`;
    case "CRASHED":
      return `crashed: ${data.reason}`;
    case "RESTARTED":
      return "restarted";
    case "SUBJECT_HALTED":
      return `halted at ${data.state}`;
    default:
      return event.kind;
  }
}
