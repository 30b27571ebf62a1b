// Wire shapes of the engine REST API.

export type FieldType = "string" | "number" | "boolean" | "record" | "list";

export interface SchemaField {
  name: string;
  type: FieldType;
  required: boolean;
  children: SchemaField[];
}

export interface BoSchema {
  id: string;
  fields: SchemaField[];
}

export interface SendOption {
  message: string;
  to: string;
  schema: BoSchema | null;
}

export interface TaskState {
  id: string;
  name: string;
  index: number;
}

export interface Task {
  task_id: string;
  instance_id: string;
  subject: string;
  state: TaskState;
  kind: "choose_outcome" | "provide_send_payload";
  options: string[] | SendOption[];
  assigned_role: string;
  agent_id: string;
  created_ts: number;
}

export interface TraceEvent {
  seq: number;
  ts: number;
  subject: string;
  kind: string;
  data: Record<string, unknown>;
  node?: string;
}

export interface InstanceReport {
  instance_id: string;
  status: "running" | "completed" | "failed";
  actors: Record<string, { state_id: string; state_name: string; status: string }>;
}

export interface ApiError {
  status: number;
  code: string;
  message: string;
}

export function chooseOptions(task: Task): string[] {
  return task.kind === "choose_outcome" ? (task.options as string[]) : [];
}

export function sendOptions(task: Task): SendOption[] {
  return task.kind === "provide_send_payload" ? (task.options as SendOption[]) : [];
}
