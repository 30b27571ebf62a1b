// Schema-driven forms: every business-object field becomes an input control,
// records become nested fieldsets, lists become repeatable groups. Reading a
// form back yields either a payload or a list of issues; callers block
// submission while issues exist.

import type { SchemaField } from "./types.js";

export interface FormIssue {
  path: string;
  message: string;
}

export interface ReadResult {
  value: Record<string, unknown>;
  issues: FormIssue[];
}

const FIELD_CLASS = "form-field";
const LIST_ITEM_CLASS = "list-item";

export function renderFields(fields: SchemaField[], container: HTMLElement, prefix = ""): void {
  for (const field of fields) {
    container.appendChild(renderField(field, joinPath(prefix, field.name)));
  }
}

function renderField(field: SchemaField, path: string): HTMLElement {
  const wrapper = document.createElement("div");
  wrapper.className = FIELD_CLASS;
  wrapper.dataset.fieldPath = path;

  const label = document.createElement("label");
  label.textContent = field.required ? `${field.name} *` : field.name;
  wrapper.appendChild(label);

  if (field.type === "record") {
    const fieldset = document.createElement("fieldset");
    fieldset.dataset.recordPath = path;
    renderFields(field.children, fieldset, path);
    wrapper.appendChild(fieldset);
    return wrapper;
  }

  if (field.type === "list") {
    const list = document.createElement("div");
    list.className = "list-group";
    list.dataset.listPath = path;
    const addButton = document.createElement("button");
    addButton.type = "button";
    addButton.className = "list-add";
    addButton.textContent = `add ${field.name}`;
    addButton.addEventListener("click", () => {
      list.insertBefore(renderListItem(field, path, list.children.length - 1), addButton);
      list.dispatchEvent(new Event("input", { bubbles: true }));
    });
    list.appendChild(addButton);
    wrapper.appendChild(list);
    return wrapper;
  }

  const input = document.createElement("input");
  input.dataset.path = path;
  if (field.type === "boolean") {
    input.type = "checkbox";
  } else {
    // Numbers stay type=text so invalid text reaches our own validation
    // instead of being silently coerced by the browser.
    input.type = "text";
    if (field.type === "number") input.inputMode = "decimal";
  }
  input.name = path;
  wrapper.appendChild(input);
  return wrapper;
}

function renderListItem(field: SchemaField, path: string, index: number): HTMLElement {
  const item = document.createElement("fieldset");
  item.className = LIST_ITEM_CLASS;
  const remove = document.createElement("button");
  remove.type = "button";
  remove.className = "list-remove";
  remove.textContent = "remove";
  remove.addEventListener("click", () => {
    const parent = item.parentElement;
    item.remove();
    parent?.dispatchEvent(new Event("input", { bubbles: true }));
  });
  item.appendChild(remove);
  renderFields(field.children, item, `${path}[${index}]`);
  return item;
}

export function readFields(fields: SchemaField[], container: HTMLElement, prefix = ""): ReadResult {
  const value: Record<string, unknown> = {};
  const issues: FormIssue[] = [];
  for (const field of fields) {
    const path = joinPath(prefix, field.name);
    const result = readField(field, container, path);
    if (result.issues.length) {
      issues.push(...result.issues);
    } else if (result.present) {
      value[field.name] = result.value;
    } else if (field.required) {
      issues.push({ path, message: "required field missing" });
    }
  }
  return { value, issues };
}

interface FieldRead {
  present: boolean;
  value?: unknown;
  issues: FormIssue[];
}

function readField(field: SchemaField, container: HTMLElement, path: string): FieldRead {
  if (field.type === "record") {
    const fieldset = container.querySelector<HTMLElement>(`[data-record-path="${cssEscape(path)}"]`);
    if (!fieldset) return { present: false, issues: [] };
    const nested = readFields(field.children, fieldset, path);
    const empty = Object.keys(nested.value).length === 0 && nested.issues.length === 0;
    if (empty && !field.required) return { present: false, issues: [] };
    return { present: true, value: nested.value, issues: nested.issues };
  }

  if (field.type === "list") {
    const list = container.querySelector<HTMLElement>(`[data-list-path="${cssEscape(path)}"]`);
    if (!list) return { present: false, issues: [] };
    const items = Array.from(list.querySelectorAll<HTMLElement>(`:scope > .${LIST_ITEM_CLASS}`));
    const values: unknown[] = [];
    const issues: FormIssue[] = [];
    items.forEach((item, i) => {
      const nested = readFields(field.children, item, `${path}[${i}]`);
      issues.push(...nested.issues);
      values.push(nested.value);
    });
    if (values.length === 0 && !field.required) return { present: false, issues };
    return { present: true, value: values, issues };
  }

  const input = container.querySelector<HTMLInputElement>(`[data-path="${cssEscape(path)}"]`);
  if (!input) return { present: false, issues: [] };

  if (field.type === "boolean") {
    return { present: true, value: input.checked, issues: [] };
  }
  const raw = input.value.trim();
  if (raw === "") {
    return { present: false, issues: [] };
  }
  if (field.type === "number") {
    const parsed = Number(raw);
    if (Number.isNaN(parsed)) {
      return { present: true, value: undefined, issues: [{ path, message: `"${raw}" is not a number` }] };
    }
    return { present: true, value: parsed, issues: [] };
  }
  return { present: true, value: input.value, issues: [] };
}

function joinPath(prefix: string, name: string): string {
  return prefix ? `${prefix}.${name}` : name;
}

// querySelector attribute values need quotes escaped; paths only contain
// identifier characters, dots and brackets, so this is enough.
function cssEscape(path: string): string {
  return path.replace(/"/g, '\\"');
}
