// Minimal observable view state. The invariant lives here: the active theme
// is always either unlocked or the default.

export type ActiveView = "CHAT" | "DASHBOARD" | "SETTINGS";

export interface UiViewState {
  activeView: ActiveView;
  themeId: string;
  connection: { connected: boolean; lastEventT: number | null };
  unlockedThemes: string[];
}

type Listener = (state: UiViewState) => void;

export const DEFAULT_THEME = "default";

export class UiStore {
  private state: UiViewState;
  private listeners: Listener[] = [];

  constructor(initial?: Partial<UiViewState>) {
    this.state = {
      activeView: "CHAT",
      themeId: DEFAULT_THEME,
      connection: { connected: false, lastEventT: null },
      unlockedThemes: [],
      ...initial,
    };
    this.enforceThemeInvariant();
  }

  get(): UiViewState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  setView(view: ActiveView): void {
    this.state = { ...this.state, activeView: view };
    this.emit();
  }

  setConnection(connected: boolean, lastEventT: number | null): void {
    this.state = { ...this.state, connection: { connected, lastEventT } };
    this.emit();
  }

  setUnlockedThemes(themes: string[]): void {
    this.state = { ...this.state, unlockedThemes: [...themes] };
    this.enforceThemeInvariant();
    this.emit();
  }

  setTheme(themeId: string): boolean {
    if (themeId !== DEFAULT_THEME && !this.state.unlockedThemes.includes(themeId)) {
      return false; // locked: refuse rather than violate the invariant
    }
    this.state = { ...this.state, themeId };
    this.emit();
    return true;
  }

  private enforceThemeInvariant(): void {
    const { themeId, unlockedThemes } = this.state;
    if (themeId !== DEFAULT_THEME && !unlockedThemes.includes(themeId)) {
      this.state = { ...this.state, themeId: DEFAULT_THEME };
    }
  }
}
