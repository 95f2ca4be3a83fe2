// Theme = design-token set. Tokens ship with the app; which ones may be
// activated comes from the API's unlocked_themes list.

export interface ThemeTokens {
  label: string;
  tokens: Record<string, string>;
}

export const THEMES: Record<string, ThemeTokens> = {
  default: {
    label: "Graphite",
    tokens: {
      "--bg": "#14161a",
      "--panel": "#1e2127",
      "--text": "#e8eaed",
      "--muted": "#9aa0a6",
      "--accent": "#7aa2f7",
      "--accent-soft": "#2b3a5c",
      "--radius": "10px",
    },
  },
  ocean: {
    label: "Ocean",
    tokens: {
      "--bg": "#0b1d26",
      "--panel": "#12303f",
      "--text": "#e3f2f7",
      "--muted": "#8fb6c4",
      "--accent": "#37c2b0",
      "--accent-soft": "#174d52",
      "--radius": "12px",
    },
  },
  forest: {
    label: "Forest",
    tokens: {
      "--bg": "#121a12",
      "--panel": "#1d2a1d",
      "--text": "#e9f0e6",
      "--muted": "#9db59a",
      "--accent": "#8fd18c",
      "--accent-soft": "#2c4a2e",
      "--radius": "8px",
    },
  },
  sunset: {
    label: "Sunset",
    tokens: {
      "--bg": "#1d1016",
      "--panel": "#2d1a22",
      "--text": "#f6e9ec",
      "--muted": "#c49aa6",
      "--accent": "#f2905e",
      "--accent-soft": "#5c2f3a",
      "--radius": "14px",
    },
  },
};

export const THEME_UNLOCK_HINTS: Record<string, number> = {
  ocean: 100,
  forest: 500,
  sunset: 1000,
};

export function applyTheme(doc: Document, themeId: string): void {
  const theme = THEMES[themeId] ?? THEMES["default"]!;
  const root = doc.documentElement;
  for (const [name, value] of Object.entries(theme.tokens)) {
    root.style.setProperty(name, value);
  }
  root.setAttribute("data-theme", themeId);
}

export function loadSavedTheme(win: Window): string {
  try {
    return win.localStorage.getItem("tether.theme") ?? "default";
  } catch {
    return "default";
  }
}

export function saveTheme(win: Window, themeId: string): void {
  try {
    win.localStorage.setItem("tether.theme", themeId);
  } catch {
    // storage unavailable: theme just resets next launch
  }
}
