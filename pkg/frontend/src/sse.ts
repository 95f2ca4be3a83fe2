// Server-sent-events subscriber built on fetch streaming instead of
// EventSource: it can send the auth token, runs in the test runner, and
// keeps an id cursor so reconnects never repeat a notification. If the
// stream cannot be (re)established it degrades to polling the feed.

import type { ApiClient, NotificationRecord } from "./api";

export interface StreamCallbacks {
  onNotification: (n: NotificationRecord) => void;
  onConnection?: (connected: boolean, lastEventT: number | null) => void;
}

export interface StreamOptions {
  pollFallbackMs?: number;
  reconnectDelayMs?: number;
  maxStreamRetries?: number;
  fetchImpl?: (input: string, init?: RequestInit) => Promise<Response>;
}

interface SseFrame {
  id?: number;
  event?: string;
  data?: string;
}

export function parseSseChunk(buffer: string): { frames: SseFrame[]; rest: string } {
  const frames: SseFrame[] = [];
  const parts = buffer.split("\n\n");
  const rest = parts.pop() ?? "";
  for (const part of parts) {
    const frame: SseFrame = {};
    for (const line of part.split("\n")) {
      if (line.startsWith(":")) continue; // heartbeat comment
      if (line.startsWith("id:")) frame.id = Number(line.slice(3).trim());
      else if (line.startsWith("event:")) frame.event = line.slice(6).trim();
      else if (line.startsWith("data:")) frame.data = line.slice(5).trim();
    }
    if (frame.id !== undefined || frame.data !== undefined) frames.push(frame);
  }
  return { frames, rest };
}

export class NotificationStream {
  cursor = 0;
  private lastEventT: number | null = null;
  private stopped = false;
  private seen = new Set<number>();
  private abort: AbortController | null = null;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private streamFailures = 0;

  constructor(
    private api: ApiClient,
    private callbacks: StreamCallbacks,
    private opts: StreamOptions = {},
  ) {}

  start(sinceId = 0): void {
    this.cursor = Math.max(this.cursor, sinceId);
    this.stopped = false;
    void this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.abort?.abort();
    if (this.pollTimer) clearTimeout(this.pollTimer);
  }

  private dispatch(record: NotificationRecord): void {
    if (this.seen.has(record.id)) return;
    this.seen.add(record.id);
    this.cursor = Math.max(this.cursor, record.id);
    this.lastEventT = record.t;
    this.callbacks.onNotification(record);
  }

  private setConnected(connected: boolean): void {
    this.callbacks.onConnection?.(connected, this.lastEventT);
  }

  private async connect(): Promise<void> {
    const doFetch = this.opts.fetchImpl ?? ((input: string, init?: RequestInit) => fetch(input, init));
    while (!this.stopped) {
      this.abort = new AbortController();
      try {
        const resp = await doFetch(this.api.streamUrl(this.cursor), {
          signal: this.abort.signal,
        });
        if (!resp.ok || !resp.body) throw new Error(`stream status ${resp.status}`);
        this.setConnected(true);
        this.streamFailures = 0;
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { frames, rest } = parseSseChunk(buffer);
          buffer = rest;
          for (const frame of frames) {
            if (frame.data && frame.event !== "error") {
              this.dispatch(JSON.parse(frame.data) as NotificationRecord);
            }
          }
        }
      } catch {
        // fall through to reconnect/fallback logic
      }
      this.setConnected(false);
      if (this.stopped) return;
      this.streamFailures += 1;
      if (this.streamFailures > (this.opts.maxStreamRetries ?? 3)) {
        this.startPolling();
        return;
      }
      await sleep(this.opts.reconnectDelayMs ?? 1000);
    }
  }

  private startPolling(): void {
    const interval = this.opts.pollFallbackMs ?? 5000;
    const poll = async () => {
      if (this.stopped) return;
      try {
        const body = await this.api.getNotifications(this.lastEventT ?? -1);
        for (const record of body.notifications) this.dispatch(record);
        this.setConnected(true);
      } catch {
        this.setConnected(false);
      }
      this.pollTimer = setTimeout(poll, interval);
    };
    void poll();
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
