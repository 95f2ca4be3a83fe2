"""Prompt assembly: turns a trigger or chat message plus its context into the
sectioned prompt the gateway sends out, and picks the response type and
delivery route.

Every prompt has the same six sections in the same order: PRINCIPLES, STYLE,
RETRIEVED, ACTIVITY, HISTORY, INPUT. Rendering is a pure function of the
bundle; when the character budget is tight, HISTORY goes first (oldest
messages), then RETRIEVED (lowest scores), then the ACTIVITY and STYLE
bodies. PRINCIPLES and INPUT are never dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .config import DEFAULT_CHECKIN_LEXICON
from .errors import BudgetImpossible, TemplateMissing
from .focus import CONTEXT_THRASH, PROLONGED_IDLE, RECOVERY, USER_MESSAGE, ActivitySummary, TriggerEvent
from .rag import ScoredChunk

NUDGE = "NUDGE"
TASK_SUGGESTION = "TASK_SUGGESTION"
EMOTIONAL_CHECKIN = "EMOTIONAL_CHECKIN"
CHAT_REPLY = "CHAT_REPLY"

ROUTE_NOTIFICATION = "NOTIFICATION"
ROUTE_CHAT = "CHAT"

SECTION_ORDER = ("PRINCIPLES", "STYLE", "RETRIEVED", "ACTIVITY", "HISTORY", "INPUT")

TEMPLATE_IDS = {
    NUDGE: "nudge",
    TASK_SUGGESTION: "task",
    EMOTIONAL_CHECKIN: "checkin",
    CHAT_REPLY: "chat",
}

TRIMMED = "(trimmed)"
EMPTY = "none"

CATEGORY_ORDER = ("IDE", "TERMINAL", "DOCS_BROWSER", "COMMUNICATION", "OTHER")


@dataclass(frozen=True)
class PrinciplesPack:
    pack_id: str
    principle_texts: tuple[str, ...]


@dataclass
class PromptBundle:
    template_id: str
    response_type: str
    sections: list[tuple[str, str]]
    route: str
    created_t: float
    retrieved_entries: list[str]
    history_entries: list[str]

    def section(self, kind: str) -> str:
        for k, text in self.sections:
            if k == kind:
                return text
        raise KeyError(kind)


def select_response_type(trigger: TriggerEvent, lexicon: list[str]
                         ) -> tuple[str, str, bool]:
    """Map a trigger to (response_type, route, celebratory)."""
    if trigger.kind == PROLONGED_IDLE:
        return NUDGE, ROUTE_NOTIFICATION, False
    if trigger.kind == CONTEXT_THRASH:
        return TASK_SUGGESTION, ROUTE_NOTIFICATION, False
    if trigger.kind == RECOVERY:
        return NUDGE, ROUTE_NOTIFICATION, True
    if trigger.kind == USER_MESSAGE:
        text = str(trigger.context.get("text", "")).lower()
        if any(word in text for word in lexicon):
            return EMOTIONAL_CHECKIN, ROUTE_CHAT, False
        return CHAT_REPLY, ROUTE_CHAT, False
    raise ValueError(f"unknown trigger kind {trigger.kind}")


class Composer:
    def __init__(self, assets_dir: str | Path | None = None,
                 prompt_char_budget: int = 12000, history_limit: int = 12,
                 retrieval_k: int = 4, lexicon: list[str] | None = None):
        self.assets_dir = Path(assets_dir) if assets_dir else None
        self.prompt_char_budget = prompt_char_budget
        self.history_limit = history_limit
        self.retrieval_k = retrieval_k
        self.lexicon = list(lexicon) if lexicon is not None else list(DEFAULT_CHECKIN_LEXICON)
        self.pack = self._load_principles()
        self._templates: dict[str, str] = {}

    # --- assets ---------------------------------------------------------------

    def _read_asset(self, relpath: str) -> str | None:
        if self.assets_dir is not None:
            p = self.assets_dir / relpath
            return p.read_text(encoding="utf-8") if p.exists() else None
        ref = resources.files("tether").joinpath("assets").joinpath(relpath)
        return ref.read_text(encoding="utf-8") if ref.is_file() else None

    def _load_principles(self) -> PrinciplesPack:
        raw = self._read_asset("principles.txt")
        if raw is None:
            raise TemplateMissing("principles")
        lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
        pack_id = "default"
        if lines and lines[0].startswith("id:"):
            pack_id = lines[0][3:].strip()
            lines = lines[1:]
        texts = tuple(ln.lstrip("- ").strip() for ln in lines)
        if not texts:
            raise TemplateMissing("principles")
        return PrinciplesPack(pack_id=pack_id, principle_texts=texts)

    def _template(self, template_id: str) -> str:
        if template_id not in self._templates:
            raw = self._read_asset(f"templates/{template_id}.txt")
            if raw is None:
                raise TemplateMissing(template_id)
            self._templates[template_id] = raw.strip()
        return self._templates[template_id]

    # --- composition ---------------------------------------------------------

    def compose(self, trigger: TriggerEvent, summary: ActivitySummary | None,
                retrieved: list[ScoredChunk], history: list[tuple[str, str]],
                current_app: str | None = None) -> PromptBundle:
        response_type, route, celebratory = select_response_type(trigger, self.lexicon)
        return self.compose_as(trigger, response_type, route, celebratory,
                               summary, retrieved, history, current_app)

    def compose_as(self, trigger: TriggerEvent, response_type: str, route: str,
                   celebratory: bool, summary: ActivitySummary | None,
                   retrieved: list[ScoredChunk], history: list[tuple[str, str]],
                   current_app: str | None = None) -> PromptBundle:
        template_id = TEMPLATE_IDS[response_type]
        style = f"template: {template_id}\n{self._template(template_id)}"
        if celebratory:
            style += "\ntone: celebrate the quick return, one line of praise"

        retrieved = retrieved[: self.retrieval_k]
        retrieved_entries = [
            f"[{s.chunk.doc_id}#{s.chunk.chunk_index}] (score={s.score:.3f}) {s.chunk.text}"
            for s in retrieved
        ]
        history_entries = [f"{role}: {text}" for role, text in history[-self.history_limit:]]

        sections = [
            ("PRINCIPLES", "\n".join(f"- {p}" for p in self.pack.principle_texts)),
            ("STYLE", style),
            ("RETRIEVED", "\n".join(retrieved_entries) if retrieved_entries else EMPTY),
            ("ACTIVITY", serialize_summary(summary)),
            ("HISTORY", "\n".join(history_entries) if history_entries else EMPTY),
            ("INPUT", describe_input(trigger, current_app)),
        ]
        return PromptBundle(template_id=template_id, response_type=response_type,
                            sections=sections, route=route, created_t=trigger.t,
                            retrieved_entries=retrieved_entries,
                            history_entries=history_entries)

    def render(self, bundle: PromptBundle) -> str:
        texts = {kind: text for kind, text in bundle.sections}
        floor_texts = dict(texts, RETRIEVED=EMPTY, HISTORY=EMPTY,
                           ACTIVITY=TRIMMED, STYLE=self._style_floor(bundle))
        if len(_join(floor_texts)) > self.prompt_char_budget:
            raise BudgetImpossible(
                "PRINCIPLES and INPUT alone exceed the prompt budget")

        history = list(bundle.history_entries)
        retrieved = list(bundle.retrieved_entries)
        while True:
            texts["HISTORY"] = "\n".join(history) if history else EMPTY
            texts["RETRIEVED"] = "\n".join(retrieved) if retrieved else EMPTY
            out = _join(texts)
            if len(out) <= self.prompt_char_budget:
                return out
            if history:
                history.pop(0)  # oldest first
            elif retrieved:
                retrieved.pop()  # lowest score last
            elif texts["ACTIVITY"] != TRIMMED:
                texts["ACTIVITY"] = TRIMMED
            elif texts["STYLE"] != self._style_floor(bundle):
                texts["STYLE"] = self._style_floor(bundle)
            else:
                return out  # floor already fits per the check above

    @staticmethod
    def _style_floor(bundle: PromptBundle) -> str:
        return f"template: {bundle.template_id}\n{TRIMMED}"


def _join(texts: dict[str, str]) -> str:
    return "\n\n".join(f"## {kind}\n{texts[kind]}" for kind in SECTION_ORDER)


def serialize_summary(summary: ActivitySummary | None) -> str:
    """Fixed key order so identical summaries always render identically."""
    if summary is None:
        return EMPTY
    apps = ",".join(f"{a}:{summary.per_app_seconds[a]:.0f}"
                    for a in sorted(summary.per_app_seconds)) or EMPTY
    cats = ",".join(f"{c}:{summary.per_category_seconds[c]:.0f}"
                    for c in CATEGORY_ORDER if c in summary.per_category_seconds) or EMPTY
    nudge = f"{summary.last_nudge_t:.0f}" if summary.last_nudge_t is not None else EMPTY
    return (f"window_seconds={summary.window_seconds:.0f} "
            f"idle_seconds={summary.idle_seconds:.0f} "
            f"switch_count={summary.switch_count} "
            f"last_nudge_t={nudge} "
            f"per_app={apps} "
            f"per_category={cats}")


def describe_input(trigger: TriggerEvent, current_app: str | None) -> str:
    if trigger.kind == USER_MESSAGE:
        return str(trigger.context.get("text", ""))
    if trigger.kind == PROLONGED_IDLE:
        minutes = trigger.context.get("idle_seconds", 0) / 60.0
        return f"idle for {minutes:.0f} minutes, last app {current_app or 'unknown'}"
    if trigger.kind == CONTEXT_THRASH:
        apps = ", ".join(trigger.context.get("apps_involved", [])) or "unknown"
        count = trigger.context.get("switch_count", 0)
        return f"switched windows {count} times in quick succession ({apps})"
    if trigger.kind == RECOVERY:
        within = trigger.context.get("recovered_within", 0)
        return f"back at work {within:.0f} seconds after the idle nudge"
    return trigger.kind
