"""Configuration: defaults, the plain-text config file grammar, and the
settings validation used by the live settings endpoint.

Grammar (one directive per line):

    # comment
    key = value                 dotted keys, e.g. thresholds.idle_threshold = 120
    app_rule = <pattern> <CAT>  repeated; ordered first-match-wins rules

Booleans are true/false, numbers parse as int or float, quiet hours are
comma-separated HH:MM-HH:MM ranges (end exclusive, may wrap midnight).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

APP_CATEGORIES = ("IDE", "TERMINAL", "DOCS_BROWSER", "COMMUNICATION", "OTHER")

DEFAULT_APP_RULES: list[tuple[str, str]] = [
    ("code*", "IDE"),
    ("vscode*", "IDE"),
    ("intellij*", "IDE"),
    ("pycharm*", "IDE"),
    ("goland*", "IDE"),
    ("vim", "IDE"),
    ("nvim", "IDE"),
    ("emacs*", "IDE"),
    ("*terminal*", "TERMINAL"),
    ("iterm*", "TERMINAL"),
    ("alacritty*", "TERMINAL"),
    ("kitty*", "TERMINAL"),
    ("konsole*", "TERMINAL"),
    ("wezterm*", "TERMINAL"),
    ("firefox*", "DOCS_BROWSER"),
    ("chrom*", "DOCS_BROWSER"),
    ("safari*", "DOCS_BROWSER"),
    ("edge*", "DOCS_BROWSER"),
    ("slack*", "COMMUNICATION"),
    ("discord*", "COMMUNICATION"),
    ("teams*", "COMMUNICATION"),
    ("zoom*", "COMMUNICATION"),
    ("*mail*", "COMMUNICATION"),
]

DEFAULT_CHECKIN_LEXICON = [
    "overwhelmed",
    "stuck",
    "anxious",
    "can't start",
    "cant start",
    "can't focus",
    "cant focus",
    "frustrated",
    "burned out",
    "panic",
    "hopeless",
]


@dataclass
class Thresholds:
    idle_threshold: float = 120.0
    away_threshold: float = 900.0
    prolonged_idle_threshold: float = 300.0
    recovery_window_seconds: float = 120.0
    thrash_n: int = 6
    thrash_window_seconds: float = 120.0
    thrash_cooldown_seconds: float = 120.0
    max_switches_per_block: int = 4
    focus_block_seconds: float = 1500.0
    summary_window_seconds: float = 900.0

    def validate(self) -> None:
        if self.idle_threshold >= self.away_threshold:
            raise ConfigError("idle_threshold must be < away_threshold")
        for name in ("idle_threshold", "away_threshold", "prolonged_idle_threshold",
                     "recovery_window_seconds", "thrash_window_seconds",
                     "thrash_cooldown_seconds", "focus_block_seconds",
                     "summary_window_seconds"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.thrash_n < 2:
            raise ConfigError("thrash_n must be >= 2")
        if self.max_switches_per_block < 0:
            raise ConfigError("max_switches_per_block must be >= 0")


@dataclass
class Policy:
    nudge_cooldown_seconds: float = 900.0
    max_nudges_per_day: int = 10
    quiet_hours: list[str] = field(default_factory=list)  # "HH:MM-HH:MM", end exclusive

    def validate(self) -> None:
        if self.nudge_cooldown_seconds <= 0:
            raise ConfigError("nudge_cooldown_seconds must be > 0")
        if self.max_nudges_per_day < 0:
            raise ConfigError("max_nudges_per_day must be >= 0")
        spans = [parse_quiet_range(r) for r in self.quiet_hours]
        flat: list[tuple[int, int]] = []
        for a, b in spans:
            flat.extend([(a, b)] if a < b else [(a, 86400), (0, b)])  # wrap midnight
        flat.sort()
        for (_, e1), (s2, _) in zip(flat, flat[1:]):
            if s2 < e1:
                raise ConfigError("quiet_hours ranges overlap")


@dataclass
class RagParams:
    chunk_size: int = 1600
    chunk_overlap: int = 200
    k: int = 4
    min_score: float = 0.25
    min_chat_index_chars: int = 80

    def validate(self) -> None:
        if self.chunk_size <= self.chunk_overlap or self.chunk_overlap < 0:
            raise ConfigError("chunk_size must be > chunk_overlap >= 0")
        if self.k < 1:
            raise ConfigError("k must be >= 1")


@dataclass
class ProviderSettings:
    kind: str = "stub"  # stub | http
    endpoint: str = ""
    api_key_env: str = ""
    model_name: str = ""
    embed_model_name: str = ""
    timeout_ms: int = 10000
    max_retries: int = 2
    max_batch: int = 64
    max_inflight: int = 2

    def validate(self) -> None:
        if self.kind not in ("stub", "http"):
            raise ConfigError(f"unknown provider kind '{self.kind}'")
        if self.kind == "http" and (not self.endpoint or not self.api_key_env):
            raise ConfigError("http provider requires provider.endpoint and provider.api_key_env")
        if self.timeout_ms <= 0 or self.max_retries < 0:
            raise ConfigError("provider timeout_ms must be > 0 and max_retries >= 0")


@dataclass
class ComposerParams:
    prompt_char_budget: int = 12000
    history_limit: int = 12
    nudge_temperature: float = 0.4
    chat_temperature: float = 0.7
    max_output_chars: int = 1200


@dataclass
class Capabilities:
    monitoring: bool = True
    chat: bool = True
    dev_aware: bool = True
    rag: bool = True
    gamified: bool = True


@dataclass
class TetherConfig:
    data_dir: str = "~/.tether/data"
    port: int = 4517
    redact_titles: bool = False
    bucket_seconds: float = 10.0
    poll_seconds: float = 1.0
    retention_days: int = 30
    assets_dir: str = ""  # empty = packaged defaults
    ui_dir: str = ""
    checkin_lexicon: list[str] = field(default_factory=lambda: list(DEFAULT_CHECKIN_LEXICON))
    app_rules: list[tuple[str, str]] = field(default_factory=lambda: list(DEFAULT_APP_RULES))
    thresholds: Thresholds = field(default_factory=Thresholds)
    policy: Policy = field(default_factory=Policy)
    rag: RagParams = field(default_factory=RagParams)
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    composer: ComposerParams = field(default_factory=ComposerParams)
    capabilities: Capabilities = field(default_factory=Capabilities)

    def validate(self) -> None:
        self.thresholds.validate()
        self.policy.validate()
        self.rag.validate()
        self.provider.validate()
        if not (0 < self.port < 65536):
            raise ConfigError("port out of range")

    def resolved_data_dir(self) -> Path:
        return Path(self.data_dir).expanduser()


def parse_quiet_range(text: str) -> tuple[int, int]:
    """Parse 'HH:MM-HH:MM' into (start, end) seconds-of-day, end exclusive."""
    try:
        start_s, end_s = text.split("-")
        start = _seconds_of_day(start_s)
        end = _seconds_of_day(end_s)
    except ValueError:
        raise ConfigError(f"bad quiet_hours range '{text}'") from None
    if start == end:
        raise ConfigError(f"empty quiet_hours range '{text}'")
    return start, end


def _seconds_of_day(hhmm: str) -> int:
    h, m = hhmm.strip().split(":")
    h, m = int(h), int(m)
    if not (0 <= h < 24 and 0 <= m < 60):
        raise ValueError(hhmm)
    return h * 3600 + m * 60


_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _coerce(value: str):
    low = value.lower()
    if low in _BOOL:
        return _BOOL[low]
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def load_config(path: str | Path) -> TetherConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    return parse_config(text)


def parse_config(text: str) -> TetherConfig:
    cfg = TetherConfig()
    saw_app_rule = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' at line {lineno}: {raw!r}", line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key == "app_rule":
                if not saw_app_rule:
                    cfg.app_rules = []  # config file replaces the default table
                    saw_app_rule = True
                parts = value.split()
                if len(parts) != 2 or parts[1] not in APP_CATEGORIES:
                    cats = "|".join(APP_CATEGORIES)
                    raise ConfigError(f"app_rule wants '<pattern> <{cats}>'")
                cfg.app_rules.append((parts[0], parts[1]))
            elif key == "checkin_lexicon":
                cfg.checkin_lexicon = [w.strip().lower() for w in value.split(",") if w.strip()]
            else:
                _assign(cfg, key, value)
        except ConfigError as e:
            raise ConfigError(f"line {lineno}: {e.message}", line=lineno) from None
    try:
        cfg.validate()
    except ConfigError as e:
        raise ConfigError(f"invalid config: {e.message}")
    return cfg


_SECTIONS = {
    "thresholds": Thresholds,
    "policy": Policy,
    "rag": RagParams,
    "provider": ProviderSettings,
    "composer": ComposerParams,
    "enable": Capabilities,
}

_ENABLE_ALIASES = {"monitoring": "monitoring", "chat": "chat", "dev_aware": "dev_aware",
                   "rag": "rag", "gamification": "gamified", "gamified": "gamified"}


def _assign(cfg: TetherConfig, key: str, value: str) -> None:
    if "." in key:
        section, _, attr = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section '{section}'")
        target_name = "capabilities" if section == "enable" else section
        target = getattr(cfg, target_name)
        if section == "enable":
            attr = _ENABLE_ALIASES.get(attr, attr)
        if section == "policy" and attr == "quiet_hours":
            target.quiet_hours = [r.strip() for r in value.split(",") if r.strip()]
            return
        if not hasattr(target, attr):
            raise ConfigError(f"unknown config key '{key}'")
        setattr(target, attr, _typed_value(key, value, getattr(target, attr)))
        return
    if not hasattr(cfg, key) or key in ("thresholds", "policy", "rag", "provider",
                                        "composer", "capabilities", "app_rules"):
        raise ConfigError(f"unknown config key '{key}'")
    setattr(cfg, key, _typed_value(key, value, getattr(cfg, key)))


def _typed_value(key: str, raw: str, current):
    """Coerce raw text and require it to match the default's type."""
    value = _coerce(raw)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"'{key}' wants true/false, got {raw!r}")
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{key}' wants an integer, got {raw!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{key}' wants a number, got {raw!r}")
        return float(value)
    return raw


# --- live settings (subset exposed over the API) ---------------------------

def settings_view(cfg: TetherConfig) -> dict:
    return {
        "thresholds": dataclasses.asdict(cfg.thresholds),
        "policy": dataclasses.asdict(cfg.policy),
        "rag": dataclasses.asdict(cfg.rag),
        "redact_titles": cfg.redact_titles,
    }


def apply_settings(cfg: TetherConfig, patch: dict) -> TetherConfig:
    """Return a new config with the patch applied, or raise ConfigError.
    Only the settings_view surface is writable."""
    if not isinstance(patch, dict):
        raise ConfigError("settings body must be an object")
    new = dataclasses.replace(
        cfg,
        thresholds=dataclasses.replace(cfg.thresholds),
        policy=dataclasses.replace(cfg.policy),
        rag=dataclasses.replace(cfg.rag),
    )
    for section_name, section_val in patch.items():
        if section_name == "redact_titles":
            if not isinstance(section_val, bool):
                raise ConfigError("redact_titles must be a boolean")
            new.redact_titles = section_val
            continue
        if section_name not in ("thresholds", "policy", "rag"):
            raise ConfigError(f"unknown settings section '{section_name}'")
        if not isinstance(section_val, dict):
            raise ConfigError(f"settings section '{section_name}' must be an object")
        target = getattr(new, section_name)
        for attr, value in section_val.items():
            if not hasattr(target, attr):
                raise ConfigError(f"unknown setting '{section_name}.{attr}'")
            current = getattr(target, attr)
            if isinstance(current, list):
                if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
                    raise ConfigError(f"setting '{section_name}.{attr}' must be a list of strings")
            elif isinstance(current, bool):
                if not isinstance(value, bool):
                    raise ConfigError(f"setting '{section_name}.{attr}' must be a boolean")
            elif isinstance(current, (int, float)):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"setting '{section_name}.{attr}' must be a number")
            setattr(target, attr, value)
    new.validate()
    return new
