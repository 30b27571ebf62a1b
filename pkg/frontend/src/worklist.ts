// Worklist per agent: polls the engine, renders tasks newest-first, and
// submits completions optimistically. A completion that races another
// session (410 TaskGone) is treated as a refresh, not an error.

import { EngineApiError, EngineClient } from "./api.js";
import { readFields, renderFields } from "./forms.js";
import { chooseOptions, sendOptions, type Task } from "./types.js";

export interface WorklistOptions {
  pollMs?: number;
}

export class WorklistView {
  private timer: ReturnType<typeof setInterval> | null = null;
  private tasks: Task[] = [];
  private banner: string | null = null;

  constructor(
    private root: HTMLElement,
    private client: EngineClient,
    public agentId: string,
    private options: WorklistOptions = {},
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
      const tasks = await this.client.listTasks(this.agentId);
      tasks.sort((a, b) => b.created_ts - a.created_ts || a.task_id.localeCompare(b.task_id));
      this.tasks = tasks;
      this.render();
    } catch {
      // Poll failures are transient; keep the last good render.
    }
  }

  render(): void {
    this.root.textContent = "";
    const heading = document.createElement("h2");
    heading.textContent = `Worklist for ${this.agentId}`;
    this.root.appendChild(heading);

    if (this.banner) {
      const banner = document.createElement("div");
      banner.className = "error-banner";
      banner.textContent = this.banner;
      this.root.appendChild(banner);
    }

    if (this.tasks.length === 0) {
      const empty = document.createElement("p");
      empty.className = "placeholder";
      empty.textContent = "no open tasks";
      this.root.appendChild(empty);
      return;
    }
    for (const task of this.tasks) {
      this.root.appendChild(this.renderTask(task));
    }
  }

  private renderTask(task: Task): HTMLElement {
    const card = document.createElement("div");
    card.className = "task-card";
    card.dataset.taskId = task.task_id;

    const title = document.createElement("h3");
    title.textContent = `${task.subject}: ${task.state.name}`;
    card.appendChild(title);

    const meta = document.createElement("p");
    meta.className = "task-meta";
    meta.textContent = `${task.kind} · role ${task.assigned_role} · instance ${task.instance_id.slice(0, 8)}`;
    card.appendChild(meta);

    if (task.kind === "choose_outcome") {
      const row = document.createElement("div");
      row.className = "outcome-row";
      for (const outcome of chooseOptions(task)) {
        const button = document.createElement("button");
        button.type = "button";
        button.className = "outcome-btn";
        button.dataset.outcome = outcome;
        button.textContent = outcome;
        button.addEventListener("click", () => void this.complete(task, outcome, null));
        row.appendChild(button);
      }
      card.appendChild(row);
    } else {
      card.appendChild(this.renderSendForm(task));
    }
    return card;
  }

  private renderSendForm(task: Task): HTMLElement {
    const form = document.createElement("form");
    form.className = "send-form";
    const options = sendOptions(task);
    let selected = options[0];

    const picker = document.createElement("select");
    picker.className = "message-picker";
    for (const option of options) {
      const entry = document.createElement("option");
      entry.value = option.message;
      entry.textContent = `${option.message} → ${option.to}`;
      picker.appendChild(entry);
    }
    if (options.length > 1) form.appendChild(picker);

    const fieldBox = document.createElement("div");
    fieldBox.className = "field-box";
    form.appendChild(fieldBox);

    const submit = document.createElement("button");
    submit.type = "submit";
    submit.className = "submit-btn";
    submit.textContent = "send";
    form.appendChild(submit);

    const issueBox = document.createElement("ul");
    issueBox.className = "issue-list";
    form.appendChild(issueBox);

    const rebuild = () => {
      fieldBox.textContent = "";
      if (selected?.schema) renderFields(selected.schema.fields, fieldBox);
      revalidate();
    };
    const revalidate = () => {
      const { issues } = selected?.schema
        ? readFields(selected.schema.fields, fieldBox)
        : { issues: [] };
      submit.disabled = issues.length > 0;
      issueBox.textContent = "";
      for (const issue of issues) {
        const item = document.createElement("li");
        item.textContent = `${issue.path}: ${issue.message}`;
        issueBox.appendChild(item);
      }
    };

    picker.addEventListener("change", () => {
      selected = options.find((o) => o.message === picker.value) ?? options[0];
      rebuild();
    });
    form.addEventListener("input", revalidate);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (!selected) return;
      const { value, issues } = selected.schema
        ? readFields(selected.schema.fields, fieldBox)
        : { value: {}, issues: [] };
      if (issues.length > 0) {
        revalidate();
        return;
      }
      void this.complete(task, selected.message, value);
    });

    rebuild();
    return form;
  }

  /** Optimistically remove the task; restore it with a banner on rejection. */
  private async complete(task: Task, outcome: string, payload: unknown): Promise<void> {
    const kept = this.tasks;
    this.banner = null;
    this.tasks = this.tasks.filter((t) => t.task_id !== task.task_id);
    this.render();
    try {
      await this.client.completeTask(task.task_id, outcome, payload, this.agentId);
    } catch (error) {
      if (error instanceof EngineApiError && error.status === 410) {
        // Someone else finished it; converge by refreshing.
        await this.refresh();
        return;
      }
      this.tasks = kept;
      this.banner = error instanceof EngineApiError ? `${error.code}: ${error.message}` : String(error);
      this.render();
      return;
    }
    await this.refresh();
  }
}
