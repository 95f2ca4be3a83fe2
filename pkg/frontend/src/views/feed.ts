// Persistent notification feed (distinct from the transient toasts): every
// delivered notification, newest at the bottom, with an empty state.

import type { NotificationRecord } from "../api";

export interface FeedView {
  element: HTMLElement;
  add(record: NotificationRecord): boolean;
  count(): number;
}

export function createFeedView(container: HTMLElement): FeedView {
  const doc = container.ownerDocument;
  const element = doc.createElement("aside");
  element.className = "feed-view";

  const heading = doc.createElement("h2");
  heading.textContent = "Notifications";
  const list = doc.createElement("ul");
  list.className = "feed-list";
  const empty = doc.createElement("li");
  empty.className = "empty-state";
  empty.textContent = "Nothing yet. Nudges land here when they happen.";
  list.appendChild(empty);

  element.append(heading, list);
  container.appendChild(element);

  const seen = new Set<number>();

  function add(record: NotificationRecord): boolean {
    if (seen.has(record.id)) return false;
    seen.add(record.id);
    empty.remove();
    const item = doc.createElement("li");
    item.className = "feed-item";
    item.dataset["notificationId"] = String(record.id);
    const title = doc.createElement("strong");
    title.textContent = record.title;
    const body = doc.createElement("span");
    body.textContent = record.body;
    item.append(title, body);
    list.appendChild(item);
    return true;
  }

  return { element, add, count: () => seen.size };
}
