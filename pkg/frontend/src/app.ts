// Entry point: agent and instance come from the query string (no login;
// the engine has no auth). ?engine= overrides the API base URL.

import { EngineClient } from "./api.js";
import { TraceView } from "./trace.js";
import { WorklistView } from "./worklist.js";

export interface AppConfig {
  engineUrl: string;
  agentId: string | null;
  instanceId: string | null;
  pollMs: number;
}

export function configFromQuery(search: string): AppConfig {
  const params = new URLSearchParams(search);
  return {
    engineUrl: params.get("engine") ?? "http://127.0.0.1:7420",
    agentId: params.get("agent"),
    instanceId: params.get("instance"),
    pollMs: Number(params.get("poll") ?? "2000") || 2000,
  };
}

export function mountApp(root: HTMLElement, config: AppConfig): { stop: () => void } {
  const client = new EngineClient(config.engineUrl);
  root.textContent = "";

  const nav = document.createElement("form");
  nav.className = "nav";
  nav.innerHTML = `
    <input name="agent" placeholder="agent id" value="${config.agentId ?? ""}"/>
    <input name="instance" placeholder="instance id" value="${config.instanceId ?? ""}"/>
    <button type="submit">open</button>
  `;
  nav.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(nav);
    const params = new URLSearchParams();
    params.set("engine", config.engineUrl);
    const agent = String(data.get("agent") ?? "").trim();
    const instance = String(data.get("instance") ?? "").trim();
    if (agent) params.set("agent", agent);
    if (instance) params.set("instance", instance);
    window.location.search = params.toString();
  });
  root.appendChild(nav);

  const stops: Array<() => void> = [];
  if (config.agentId) {
    const box = document.createElement("section");
    box.id = "worklist";
    root.appendChild(box);
    const view = new WorklistView(box, client, config.agentId, { pollMs: config.pollMs });
    view.start();
    stops.push(() => view.stop());
  }
  if (config.instanceId) {
    const box = document.createElement("section");
    box.id = "trace";
    root.appendChild(box);
    const view = new TraceView(box, client, config.instanceId, { pollMs: config.pollMs });
    view.start();
    stops.push(() => view.stop());
  }
  if (!config.agentId && !config.instanceId) {
    const hint = document.createElement("p");
    hint.className = "placeholder";
    hint.textContent = "pass ?agent=<id> for a worklist and/or ?instance=<id> for a trace";
    root.appendChild(hint);
  }
  return { stop: () => stops.forEach((fn) => fn()) };
}
