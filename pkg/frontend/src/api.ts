// Typed client for the daemon's loopback API. The UI never computes domain
// numbers itself; everything rendered comes back from these calls.

export interface ChatMessage {
  id: number;
  t: number;
  role: "USER" | "ASSISTANT" | "SYSTEM";
  text: string;
  response_type?: string;
  linked_trigger_id?: string;
}

export interface ChatReply {
  user_message_id: number;
  reply: ChatMessage;
}

export interface GamificationView {
  points: number;
  badges: string[];
  streak_days: number;
  last_active_day: string;
  unlocked_themes: string[];
  next_milestone: { points: number; theme: string } | null;
  journal_length: number;
}

export interface StatusView {
  mode: "ACTIVE" | "IDLE" | "AWAY";
  current_app: string | null;
  idle_seconds: number;
  session: { start_t: number; app: string; switch_count: number } | null;
}

export interface NotificationRecord {
  id: number;
  t: number;
  title: string;
  body: string;
  kind: string;
  urgency: string;
}

export interface SettingsView {
  thresholds: Record<string, number>;
  policy: { nudge_cooldown_seconds: number; max_nudges_per_day: number; quiet_hours: string[] };
  rag: Record<string, number>;
  redact_titles: boolean;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    public token: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
        ...init,
        headers: {
          Authorization: `Bearer ${this.token}`,
          ...(init?.body ? { "Content-Type": "application/json" } : {}),
          ...init?.headers,
        },
      });
    } catch (e) {
      throw new ApiError(0, "OFFLINE", `daemon unreachable: ${String(e)}`);
    }
    if (!resp.ok) {
      let code = "HTTP_ERROR";
      let message = `${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: { code?: string; message?: string } };
        code = body.error?.code ?? code;
        message = body.error?.message ?? message;
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  getCapabilities(): Promise<Record<string, boolean>> {
    return this.request("/v1/capabilities");
  }

  getStatus(): Promise<StatusView> {
    return this.request("/v1/status");
  }

  getGamification(): Promise<GamificationView> {
    return this.request("/v1/gamification");
  }

  getSettings(): Promise<SettingsView> {
    return this.request("/v1/settings");
  }

  putSettings(patch: unknown): Promise<SettingsView> {
    return this.request("/v1/settings", { method: "PUT", body: JSON.stringify(patch) });
  }

  postChat(text: string): Promise<ChatReply> {
    return this.request("/v1/chat/messages", { method: "POST", body: JSON.stringify({ text }) });
  }

  getMessages(limit: number, beforeId?: number): Promise<{ messages: ChatMessage[] }> {
    const before = beforeId !== undefined ? `&before_id=${beforeId}` : "";
    return this.request(`/v1/chat/messages?limit=${limit}${before}`);
  }

  getNotifications(sinceT: number): Promise<{ notifications: NotificationRecord[] }> {
    return this.request(`/v1/notifications?since=${sinceT}`);
  }

  postDocument(title: string, text: string): Promise<{ chunks_indexed: number }> {
    return this.request("/v1/documents", { method: "POST", body: JSON.stringify({ title, text }) });
  }

  // EventSource cannot set headers, so the stream carries the token in the URL
  streamUrl(sinceId: number): string {
    return `${this.baseUrl}/v1/notifications/stream?since=${sinceId}&token=${encodeURIComponent(this.token)}`;
  }
}

// Token bootstrap: accept ?token= once, keep it in localStorage, scrub the URL.
export function discoverToken(win: Window): string {
  const url = new URL(win.location.href);
  const fromUrl = url.searchParams.get("token");
  if (fromUrl) {
    try {
      win.localStorage.setItem("tether.token", fromUrl);
    } catch {
      // private mode: session-only token still works
    }
    url.searchParams.delete("token");
    win.history.replaceState(null, "", url.toString());
    return fromUrl;
  }
  try {
    return win.localStorage.getItem("tether.token") ?? "";
  } catch {
    return "";
  }
}
