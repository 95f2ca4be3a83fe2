// App shell: tabs, theme bootstrap, the notification stream, and wiring
// between the daemon API and the three views.

import { ApiClient, discoverToken } from "./api";
import { NotificationStream } from "./sse";
import { UiStore, ActiveView } from "./state";
import { applyTheme, loadSavedTheme } from "./theme";
import { ToastManager } from "./toast";
import { createChatView } from "./views/chat";
import { createDashboard } from "./views/dashboard";
import { createFeedView } from "./views/feed";
import { createSettingsView } from "./views/settings";

export function mountApp(root: HTMLElement, api: ApiClient): { store: UiStore } {
  const doc = root.ownerDocument;
  const win = doc.defaultView as Window;
  const store = new UiStore({ themeId: loadSavedTheme(win) });
  applyTheme(doc, store.get().themeId);

  const shell = doc.createElement("div");
  shell.className = "shell";

  const header = doc.createElement("header");
  const title = doc.createElement("h1");
  title.textContent = "Tether";
  const offline = doc.createElement("div");
  offline.className = "offline-banner hidden";
  offline.textContent = "Connection lost, retrying quietly";
  const nav = doc.createElement("nav");
  const tabs: Record<ActiveView, HTMLButtonElement> = {} as never;
  for (const view of ["CHAT", "DASHBOARD", "SETTINGS"] as const) {
    const tab = doc.createElement("button");
    tab.type = "button";
    tab.textContent = view.charAt(0) + view.slice(1).toLowerCase();
    tab.addEventListener("click", () => store.setView(view));
    tabs[view] = tab;
    nav.appendChild(tab);
  }
  header.append(title, nav, offline);

  const mainRow = doc.createElement("div");
  mainRow.className = "main-row";
  const viewHost = doc.createElement("main");
  mainRow.appendChild(viewHost);

  shell.append(header, mainRow);
  root.appendChild(shell);

  const chatHost = doc.createElement("div");
  const dashHost = doc.createElement("div");
  const settingsHost = doc.createElement("div");
  viewHost.append(chatHost, dashHost, settingsHost);

  createChatView(chatHost, api);
  const dashboard = createDashboard(dashHost, api, store);
  createSettingsView(settingsHost, api);
  const feed = createFeedView(mainRow);
  const toasts = new ToastManager(root);

  function showView(view: ActiveView): void {
    chatHost.hidden = view !== "CHAT";
    dashHost.hidden = view !== "DASHBOARD";
    settingsHost.hidden = view !== "SETTINGS";
    for (const [name, tab] of Object.entries(tabs)) {
      tab.classList.toggle("tab-active", name === view);
    }
  }

  store.subscribe((state) => {
    showView(state.activeView);
    offline.classList.toggle("hidden", state.connection.connected);
  });
  showView(store.get().activeView);

  const stream = new NotificationStream(api, {
    onNotification: (record) => {
      toasts.show(record);
      feed.add(record);
    },
    onConnection: (connected, lastEventT) => store.setConnection(connected, lastEventT),
  });
  stream.start(0);
  dashboard.startPolling(5000);

  win.addEventListener("beforeunload", () => {
    stream.stop();
    dashboard.stop();
  });

  return { store };
}

// Browser entry point; tests import mountApp and drive it directly.
if (typeof document !== "undefined" && document.getElementById("app")) {
  const token = discoverToken(window);
  const api = new ApiClient(window.location.origin, token);
  mountApp(document.getElementById("app") as HTMLElement, api);
}
