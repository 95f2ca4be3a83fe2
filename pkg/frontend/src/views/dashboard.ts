// Gamification dashboard: points, badges, streak, milestone progress and the
// theme picker. Every figure shown is the API's value verbatim; the only
// client-side arithmetic is the progress-bar ratio.

import { ApiClient, GamificationView } from "../api";
import { UiStore } from "../state";
import { THEMES, THEME_UNLOCK_HINTS, applyTheme, saveTheme } from "../theme";

export interface DashboardView {
  element: HTMLElement;
  render(state: GamificationView): void;
  refresh(): Promise<void>;
  startPolling(intervalMs?: number): void;
  stop(): void;
}

export function createDashboard(
  container: HTMLElement,
  api: ApiClient,
  store: UiStore,
): DashboardView {
  const doc = container.ownerDocument;
  const win = doc.defaultView as Window;
  const element = doc.createElement("section");
  element.className = "dashboard-view";

  const points = doc.createElement("div");
  points.className = "stat stat-points";
  const streak = doc.createElement("div");
  streak.className = "stat stat-streak";
  const progressWrap = doc.createElement("div");
  progressWrap.className = "progress-wrap";
  const progressLabel = doc.createElement("div");
  progressLabel.className = "progress-label";
  const progressBar = doc.createElement("div");
  progressBar.className = "progress-bar";
  const progressFill = doc.createElement("div");
  progressFill.className = "progress-fill";
  progressBar.appendChild(progressFill);
  progressWrap.append(progressLabel, progressBar);

  const badges = doc.createElement("div");
  badges.className = "badge-grid";
  const themesRow = doc.createElement("div");
  themesRow.className = "theme-picker";

  element.append(points, streak, progressWrap, badges, themesRow);
  container.appendChild(element);

  let previousUnlocked: string[] | null = null;
  let timer: ReturnType<typeof setTimeout> | null = null;

  function render(state: GamificationView): void {
    points.textContent = `${state.points} points`;
    points.dataset["points"] = String(state.points);
    streak.textContent = `${state.streak_days} day streak`;
    streak.dataset["streak"] = String(state.streak_days);

    if (state.next_milestone) {
      progressLabel.textContent =
        `${state.points}/${state.next_milestone.points} to unlock ${state.next_milestone.theme}`;
      const ratio = Math.min(1, state.points / state.next_milestone.points);
      progressFill.style.width = `${(ratio * 100).toFixed(1)}%`;
    } else {
      progressLabel.textContent = `${state.points} points, every theme unlocked`;
      progressFill.style.width = "100%";
    }

    badges.textContent = "";
    if (state.badges.length === 0) {
      const empty = doc.createElement("div");
      empty.className = "empty-state";
      empty.textContent = "No badges yet. A finished focus block earns the first one.";
      badges.appendChild(empty);
    }
    for (const badge of state.badges) {
      const tile = doc.createElement("div");
      tile.className = "badge-tile";
      tile.dataset["badge"] = badge;
      tile.textContent = badge.replace(/_/g, " ");
      badges.appendChild(tile);
    }

    store.setUnlockedThemes(state.unlocked_themes);
    renderThemePicker(state);

    if (previousUnlocked !== null) {
      for (const t of state.unlocked_themes) {
        if (!previousUnlocked.includes(t)) {
          const tile = themesRow.querySelector(`[data-theme-id="${t}"]`);
          tile?.classList.add("theme-unlocked-now");
        }
      }
    }
    previousUnlocked = [...state.unlocked_themes];
  }

  function renderThemePicker(state: GamificationView): void {
    themesRow.textContent = "";
    for (const [themeId, theme] of Object.entries(THEMES)) {
      const button = doc.createElement("button");
      button.type = "button";
      button.className = "theme-tile";
      button.dataset["themeId"] = themeId;
      button.textContent = theme.label;
      const unlocked = themeId === "default" || state.unlocked_themes.includes(themeId);
      if (!unlocked) {
        button.disabled = true;
        const hint = doc.createElement("small");
        hint.textContent = `unlocks at ${THEME_UNLOCK_HINTS[themeId]} points`;
        button.appendChild(hint);
      }
      if (store.get().themeId === themeId) button.classList.add("theme-active");
      button.addEventListener("click", () => {
        if (store.setTheme(themeId)) {
          applyTheme(doc, themeId);
          saveTheme(win, themeId);
          for (const other of themesRow.querySelectorAll(".theme-tile")) {
            other.classList.toggle("theme-active", other === button);
          }
        }
      });
      themesRow.appendChild(button);
    }
  }

  async function refresh(): Promise<void> {
    render(await api.getGamification());
  }

  function startPolling(intervalMs = 5000): void {
    const tick = async () => {
      try {
        await refresh();
      } catch {
        // stale dashboard tolerated until the next poll succeeds
      }
      timer = setTimeout(tick, intervalMs);
    };
    void tick();
  }

  function stop(): void {
    if (timer) clearTimeout(timer);
  }

  return { element, render, refresh, startPolling, stop };
}
