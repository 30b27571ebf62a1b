import { afterEach, describe, expect, it, vi } from "vitest";

import { EngineApiError, EngineClient } from "../src/api.js";

function fakeResponse(status: number, body: unknown): any {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: String(status),
    text: async () => JSON.stringify(body),
  };
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("EngineClient", () => {
  it("lists tasks for an agent", async () => {
    const fetchMock = vi.fn(async () => fakeResponse(200, { tasks: [{ task_id: "t1" }] }));
    vi.stubGlobal("fetch", fetchMock);
    const client = new EngineClient("http://engine");
    const tasks = await client.listTasks("alice");
    expect(tasks).toEqual([{ task_id: "t1" }]);
    expect(fetchMock).toHaveBeenCalledWith("http://engine/agents/alice/tasks");
  });

  it("posts completions with outcome, payload and agent", async () => {
    const fetchMock = vi.fn(async () => fakeResponse(200, {}));
    vi.stubGlobal("fetch", fetchMock);
    await new EngineClient("http://engine").completeTask("t1", "ok", { qty: 1 }, "alice");
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://engine/tasks/t1/complete");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({ outcome: "ok", payload: { qty: 1 }, agent_id: "alice" });
  });

  it("maps engine errors to typed exceptions", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => fakeResponse(410, { code: "TaskGone", message: "task 't1' is not open" })));
    const client = new EngineClient("http://engine");
    const error = await client.completeTask("t1", "ok", null).catch((e) => e);
    expect(error).toBeInstanceOf(EngineApiError);
    expect(error.status).toBe(410);
    expect(error.code).toBe("TaskGone");
  });

  it("fetches merged traces", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => fakeResponse(200, { events: [{ seq: 1, kind: "STATE_ENTERED" }] })));
    const events = await new EngineClient("http://engine").getTrace("i1");
    expect(events).toHaveLength(1);
  });
});
