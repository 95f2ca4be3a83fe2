// Toast rail for incoming notifications. Each notification id renders at
// most one toast ever, so stream reconnects can never duplicate.

import type { NotificationRecord } from "./api";

export class ToastManager {
  private seen = new Set<number>();
  readonly element: HTMLElement;

  constructor(
    private container: HTMLElement,
    private dismissMs = 6000,
  ) {
    const doc = container.ownerDocument;
    this.element = doc.createElement("div");
    this.element.className = "toast-rail";
    this.element.setAttribute("role", "status");
    this.element.setAttribute("aria-live", "polite");
    container.appendChild(this.element);
  }

  get shownCount(): number {
    return this.seen.size;
  }

  show(record: NotificationRecord): boolean {
    if (this.seen.has(record.id)) return false;
    this.seen.add(record.id);
    const doc = this.container.ownerDocument;
    const toast = doc.createElement("div");
    toast.className = "toast";
    toast.dataset["notificationId"] = String(record.id);

    const title = doc.createElement("strong");
    title.textContent = record.title;
    const body = doc.createElement("span");
    body.textContent = record.body;
    toast.append(title, body);
    this.element.appendChild(toast);

    const win = doc.defaultView;
    const reducedMotion = win?.matchMedia?.("(prefers-reduced-motion: reduce)")?.matches;
    if (!reducedMotion) toast.classList.add("toast-enter");
    win?.setTimeout(() => toast.remove(), this.dismissMs);
    return true;
  }
}
