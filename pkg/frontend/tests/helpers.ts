// Shared test scaffolding: a scripted fetch and a happy-dom document.

import { Window } from "happy-dom";
import { ApiClient } from "../src/api";

export interface Route {
  method: string;
  path: RegExp | string;
  status?: number;
  body?: unknown;
  handler?: (url: string, init?: RequestInit) => { status: number; body: unknown };
}

export function scriptedFetch(routes: Route[]) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const method = (init?.method ?? "GET").toUpperCase();
    for (const route of routes) {
      const matches =
        typeof route.path === "string" ? url.includes(route.path) : route.path.test(url);
      if (matches && route.method.toUpperCase() === method) {
        const result = route.handler
          ? route.handler(url, init)
          : { status: route.status ?? 200, body: route.body ?? {} };
        return new Response(JSON.stringify(result.body), {
          status: result.status,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    return new Response(JSON.stringify({ error: { code: "NOT_FOUND", message: url } }), {
      status: 404,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

export function makeDom(): { window: Window; body: HTMLElement } {
  const window = new Window({ url: "http://127.0.0.1:4517/" });
  return { window, body: window.document.body as unknown as HTMLElement };
}

export function makeClient(routes: Route[]): { api: ApiClient; calls: { url: string }[] } {
  const { impl, calls } = scriptedFetch(routes);
  return { api: new ApiClient("http://127.0.0.1:4517", "test-token", impl), calls };
}

export function flush(ms = 0): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
