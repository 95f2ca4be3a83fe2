// Chat window: optimistic send, assistant replies, upward paging through
// history, and a retry affordance when the provider is down. All content
// rendered verbatim from the API.

import { ApiClient, ApiError, ChatMessage } from "../api";

export interface ChatView {
  element: HTMLElement;
  send(): Promise<void>;
  loadOlder(): Promise<number>;
  input: HTMLTextAreaElement;
  sendButton: HTMLButtonElement;
  messageList: HTMLElement;
  banner: HTMLElement;
}

const PAGE_SIZE = 30;

export function createChatView(container: HTMLElement, api: ApiClient): ChatView {
  const doc = container.ownerDocument;
  const element = doc.createElement("section");
  element.className = "chat-view";

  const banner = doc.createElement("div");
  banner.className = "banner hidden";

  const messageList = doc.createElement("div");
  messageList.className = "message-list";

  const form = doc.createElement("form");
  form.className = "chat-input-row";
  const input = doc.createElement("textarea");
  input.placeholder = "Ask for a next step, a plan, or just say how it is going";
  input.rows = 2;
  const sendButton = doc.createElement("button");
  sendButton.type = "submit";
  sendButton.textContent = "Send";
  sendButton.disabled = true;
  form.append(input, sendButton);

  element.append(banner, messageList, form);
  container.appendChild(element);

  let oldestId: number | null = null;
  let pending: HTMLElement | null = null;
  let lastFailedText: string | null = null;

  function bubble(msg: ChatMessage): HTMLElement {
    const row = doc.createElement("div");
    row.className = `bubble bubble-${msg.role.toLowerCase()}`;
    row.dataset["messageId"] = String(msg.id);
    row.textContent = msg.text;
    return row;
  }

  function setBanner(text: string | null, retry = false): void {
    banner.textContent = "";
    if (text === null) {
      banner.classList.add("hidden");
      return;
    }
    banner.classList.remove("hidden");
    banner.append(doc.createTextNode(text));
    if (retry) {
      const retryButton = doc.createElement("button");
      retryButton.type = "button";
      retryButton.className = "retry";
      retryButton.textContent = "Retry";
      retryButton.addEventListener("click", () => {
        if (lastFailedText !== null) {
          input.value = lastFailedText;
          lastFailedText = null;
          void send();
        }
      });
      banner.appendChild(retryButton);
    }
  }

  function track(msg: ChatMessage): void {
    oldestId = oldestId === null ? msg.id : Math.min(oldestId, msg.id);
  }

  async function loadInitial(): Promise<void> {
    try {
      const body = await api.getMessages(PAGE_SIZE);
      for (const msg of [...body.messages].reverse()) {
        messageList.appendChild(bubble(msg));
        track(msg);
      }
      setBanner(null);
    } catch {
      setBanner("Daemon unreachable; showing nothing until it returns.");
    }
  }

  async function loadOlder(): Promise<number> {
    if (oldestId === null) return 0;
    const body = await api.getMessages(PAGE_SIZE, oldestId);
    for (const msg of body.messages) {
      // newest-first page, prepended above current content
      messageList.insertBefore(bubble(msg), messageList.firstChild);
      track(msg);
    }
    return body.messages.length;
  }

  async function send(): Promise<void> {
    const text = input.value.trim();
    if (!text || pending) return;
    input.value = "";
    refreshDisabled();

    const optimistic = doc.createElement("div");
    optimistic.className = "bubble bubble-user bubble-pending";
    optimistic.textContent = text;
    messageList.appendChild(optimistic);

    pending = doc.createElement("div");
    pending.className = "bubble bubble-assistant bubble-typing";
    pending.textContent = "thinking";
    messageList.appendChild(pending);

    try {
      const body = await api.postChat(text);
      optimistic.classList.remove("bubble-pending");
      optimistic.dataset["messageId"] = String(body.user_message_id);
      track({ ...body.reply, id: body.user_message_id });
      pending.remove();
      pending = null;
      messageList.appendChild(bubble(body.reply));
      setBanner(null);
    } catch (e) {
      pending?.remove();
      pending = null;
      optimistic.remove();
      lastFailedText = text;
      if (e instanceof ApiError && e.status === 503) {
        setBanner("The assistant is unreachable; your message was saved.", true);
      } else if (e instanceof ApiError && e.status === 0) {
        setBanner("Offline: cannot reach the daemon.", true);
      } else {
        setBanner(`Send failed: ${e instanceof Error ? e.message : String(e)}`, true);
      }
    }
    refreshDisabled();
  }

  function refreshDisabled(): void {
    sendButton.disabled = input.value.trim().length === 0;
  }

  input.addEventListener("input", refreshDisabled);
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter" && !ev.shiftKey) {
      ev.preventDefault();
      void send();
    }
  });
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void send();
  });
  messageList.addEventListener("scroll", () => {
    if (messageList.scrollTop === 0) void loadOlder();
  });

  void loadInitial();
  return { element, send, loadOlder, input, sendButton, messageList, banner };
}
