// Thin typed client over the engine REST API. The console performs no
// writes other than task completion, so the whole page stays refresh-safe.

import type { ApiError, InstanceReport, Task, TraceEvent } from "./types.js";

export class EngineApiError extends Error implements ApiError {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function asJson(response: Response): Promise<any> {
  const text = await response.text();
  let doc: any = {};
  try {
    doc = text ? JSON.parse(text) : {};
  } catch {
    doc = { code: "BadResponse", message: text.slice(0, 200) };
  }
  if (!response.ok) {
    throw new EngineApiError(response.status, doc.code ?? "HttpError", doc.message ?? response.statusText);
  }
  return doc;
}

export class EngineClient {
  constructor(public baseUrl: string) {}

  async listTasks(agentId: string): Promise<Task[]> {
    const doc = await asJson(await fetch(`${this.baseUrl}/agents/${encodeURIComponent(agentId)}/tasks`));
    return doc.tasks as Task[];
  }

  async completeTask(taskId: string, outcome: string, payload: unknown, agentId?: string): Promise<void> {
    const body: Record<string, unknown> = { outcome, payload };
    if (agentId) body.agent_id = agentId;
    await asJson(
      await fetch(`${this.baseUrl}/tasks/${encodeURIComponent(taskId)}/complete`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  async getTrace(instanceId: string): Promise<TraceEvent[]> {
    const doc = await asJson(await fetch(`${this.baseUrl}/instances/${encodeURIComponent(instanceId)}/trace`));
    return doc.events as TraceEvent[];
  }

  async getInstance(instanceId: string): Promise<InstanceReport> {
    return (await asJson(await fetch(`${this.baseUrl}/instances/${encodeURIComponent(instanceId)}`))) as InstanceReport;
  }
}
