// Settings panel: reads the live settings document, edits a few fields, and
// PUTs the patch back. Validation errors from the daemon render inline.

import { ApiClient, ApiError, SettingsView as SettingsDoc } from "../api";

export interface SettingsView {
  element: HTMLElement;
  load(): Promise<void>;
  save(): Promise<boolean>;
  status: HTMLElement;
  fields: Record<string, HTMLInputElement>;
}

const THRESHOLD_FIELDS = [
  ["idle_threshold", "Idle after (seconds)"],
  ["away_threshold", "Away after (seconds)"],
  ["prolonged_idle_threshold", "Nudge after (seconds)"],
] as const;

const POLICY_FIELDS = [
  ["nudge_cooldown_seconds", "Nudge cooldown (seconds)"],
  ["max_nudges_per_day", "Max nudges per day"],
] as const;

export function createSettingsView(container: HTMLElement, api: ApiClient): SettingsView {
  const doc = container.ownerDocument;
  const element = doc.createElement("section");
  element.className = "settings-view";

  const form = doc.createElement("form");
  const status = doc.createElement("div");
  status.className = "settings-status";
  const fields: Record<string, HTMLInputElement> = {};

  function row(group: string, key: string, label: string): void {
    const wrap = doc.createElement("label");
    wrap.className = "settings-row";
    const caption = doc.createElement("span");
    caption.textContent = label;
    const input = doc.createElement("input");
    input.type = "number";
    input.name = `${group}.${key}`;
    fields[`${group}.${key}`] = input;
    wrap.append(caption, input);
    form.appendChild(wrap);
  }

  for (const [key, label] of THRESHOLD_FIELDS) row("thresholds", key, label);
  for (const [key, label] of POLICY_FIELDS) row("policy", key, label);

  const redactWrap = doc.createElement("label");
  redactWrap.className = "settings-row";
  const redactCaption = doc.createElement("span");
  redactCaption.textContent = "Redact window titles";
  const redact = doc.createElement("input");
  redact.type = "checkbox";
  redact.name = "redact_titles";
  redactWrap.append(redactCaption, redact);
  form.appendChild(redactWrap);

  const save = doc.createElement("button");
  save.type = "submit";
  save.textContent = "Save settings";
  form.appendChild(save);

  element.append(form, status);
  container.appendChild(element);

  function fill(docBody: SettingsDoc): void {
    for (const [key] of THRESHOLD_FIELDS) {
      fields[`thresholds.${key}`]!.value = String(docBody.thresholds[key]);
    }
    for (const [key] of POLICY_FIELDS) {
      const value = docBody.policy[key as keyof typeof docBody.policy];
      fields[`policy.${key}`]!.value = String(value);
    }
    redact.checked = docBody.redact_titles;
  }

  async function load(): Promise<void> {
    try {
      fill(await api.getSettings());
      status.textContent = "";
    } catch (e) {
      status.textContent = `Could not load settings: ${e instanceof Error ? e.message : e}`;
    }
  }

  async function saveNow(): Promise<boolean> {
    const patch = {
      thresholds: Object.fromEntries(
        THRESHOLD_FIELDS.map(([key]) => [key, Number(fields[`thresholds.${key}`]!.value)]),
      ),
      policy: Object.fromEntries(
        POLICY_FIELDS.map(([key]) => [key, Number(fields[`policy.${key}`]!.value)]),
      ),
      redact_titles: redact.checked,
    };
    try {
      fill(await api.putSettings(patch));
      status.textContent = "Saved.";
      status.classList.remove("settings-error");
      return true;
    } catch (e) {
      status.textContent =
        e instanceof ApiError ? `Rejected: ${e.message}` : `Save failed: ${String(e)}`;
      status.classList.add("settings-error");
      return false;
    }
  }

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void saveNow();
  });

  void load();
  return { element, load, save: saveNow, status, fields };
}
