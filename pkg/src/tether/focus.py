"""Focus state machine: consumes ActivityEvents, detects disengagement and
recovery, and aggregates activity for prompt context.

Timing semantics (all virtual, driven by event timestamps and advance()):

* Input activity markers are INPUT_BURST, IDLE_START and IDLE_END; each sets
  last_input_t to its timestamp. WINDOW_FOCUS never resets the input clock,
  since focus can move without the user doing anything.
* An idle gap is the half-open span between consecutive activity markers,
  with an implicit marker at t=0 (session start). PROLONGED_IDLE fires once
  per gap, exactly at gap_start + prolonged_idle_threshold, as soon as the
  clock crosses that point.
* A gap that fired PROLONGED_IDLE arms recovery when it is closed by a
  resume marker (INPUT_BURST or IDLE_END) at time r. RECOVERY fires at r if
  the focused app classifies as IDE/TERMINAL, or if no app was ever focused
  (no evidence of a non-dev context); otherwise it fires at the first
  WINDOW_FOCUS onto a dev app strictly before r + recovery_window_seconds,
  and lapses silently at that deadline. recovered_within measures from the
  PROLONGED_IDLE trigger.
* CONTEXT_THRASH fires when >= thrash_n WINDOW_FOCUS events fall in the
  half-open window (f - thrash_window_seconds, f], then stays quiet for
  thrash_cooldown_seconds.
"""

from __future__ import annotations

import fnmatch
import logging
from dataclasses import dataclass, field

from .config import Thresholds
from .errors import OrderError
from .monitor import ACTIVITY_KINDS, RESUME_KINDS, WINDOW_FOCUS, ActivityEvent

logger = logging.getLogger(__name__)

MODE_ACTIVE = "ACTIVE"
MODE_IDLE = "IDLE"
MODE_AWAY = "AWAY"

PROLONGED_IDLE = "PROLONGED_IDLE"
CONTEXT_THRASH = "CONTEXT_THRASH"
RECOVERY = "RECOVERY"
USER_MESSAGE = "USER_MESSAGE"

CAT_IDE = "IDE"
CAT_TERMINAL = "TERMINAL"
CAT_DOCS = "DOCS_BROWSER"
CAT_COMM = "COMMUNICATION"
CAT_OTHER = "OTHER"

DEV_CATEGORIES = (CAT_IDE, CAT_TERMINAL)


@dataclass(frozen=True)
class TriggerEvent:
    trigger_id: str
    t: float
    kind: str
    context: dict

    def to_record(self) -> dict:
        return {"trigger_id": self.trigger_id, "t": self.t, "kind": self.kind,
                "context": self.context}


@dataclass(frozen=True)
class FocusSession:
    start_t: float
    end_t: float
    dominant_app: str
    switch_count: int
    uninterrupted: bool

    @property
    def duration(self) -> float:
        return self.end_t - self.start_t


@dataclass
class ActivitySummary:
    window_seconds: float
    per_app_seconds: dict[str, float]
    per_category_seconds: dict[str, float]
    idle_seconds: float
    switch_count: int
    last_nudge_t: float | None


@dataclass
class FocusState:
    mode: str
    last_input_t: float
    current_app: str | None
    session_start_t: float


class AppClassifier:
    """Ordered glob rules, first match wins, total over all app ids."""

    def __init__(self, rules: list[tuple[str, str]]):
        self.rules = [(pat.lower(), cat) for pat, cat in rules]

    def classify(self, app_id: str) -> str:
        low = (app_id or "").lower()
        for pattern, category in self.rules:
            if fnmatch.fnmatchcase(low, pattern):
                return category
        return CAT_OTHER


def _measure(intervals: list[tuple[float, float]], lo: float, hi: float) -> float:
    """Total length of the intervals clipped to [lo, hi)."""
    total = 0.0
    for a, b in intervals:
        s, e = max(a, lo), min(b, hi)
        if e > s:
            total += e - s
    return total


@dataclass
class _OpenSession:
    start_t: float
    seg_start: float
    seg_app: str
    switch_count: int = 0
    app_seconds: dict[str, float] = field(default_factory=dict)

    def cut(self, t: float, next_app: str | None) -> None:
        self.app_seconds[self.seg_app] = self.app_seconds.get(self.seg_app, 0.0) + max(
            0.0, t - self.seg_start)
        self.seg_start = t
        if next_app is not None:
            self.seg_app = next_app


class FocusEngine:
    def __init__(self, thresholds: Thresholds, classifier: AppClassifier,
                 session_start_t: float = 0.0):
        self.thresholds = thresholds
        self.classifier = classifier
        self.session_start_t = session_start_t
        self.clock = session_start_t
        self.last_event_t = session_start_t
        self.last_input_t = session_start_t
        self.current_app: str | None = None
        self.last_nudge_t: float | None = None
        self._gap_fired = False
        self._pending_recovery: tuple[float, float] | None = None  # (anchor_t, deadline)
        self._focus_times: list[tuple[float, str]] = []  # thrash window
        self._thrash_suppress_until = session_start_t
        self._open: _OpenSession | None = None
        self._completed: list[FocusSession] = []
        self._history: list[ActivityEvent] = []
        self._trigger_seq = 0

    # --- trigger pipeline ---------------------------------------------------

    def ingest(self, event: ActivityEvent, now: float | None = None) -> list[TriggerEvent]:
        if event.t < self.last_event_t or event.t < self.clock:
            raise OrderError(
                f"event at t={event.t} is older than engine clock {max(self.clock, self.last_event_t)}")
        triggers = self.advance(max(event.t, now if now is not None else event.t))
        self.last_event_t = event.t
        self._history.append(event)

        if event.kind in ACTIVITY_KINDS:
            if event.kind in RESUME_KINDS and self._gap_fired:
                anchor = self.last_input_t + self.thresholds.prolonged_idle_threshold
                trig = self._try_recover_at(event.t, anchor)
                if trig is not None:
                    triggers.append(trig)
                else:
                    self._pending_recovery = (
                        anchor, event.t + self.thresholds.recovery_window_seconds)
            self.last_input_t = event.t
            self._gap_fired = False
            if (event.kind in RESUME_KINDS and self._open is None
                    and self.current_app is not None
                    and self.classifier.classify(self.current_app) in DEV_CATEGORIES):
                self._open = _OpenSession(start_t=event.t, seg_start=event.t,
                                          seg_app=self.current_app)
        elif event.kind == WINDOW_FOCUS:
            triggers.extend(self._on_focus(event))

        return triggers

    def advance(self, to_t: float) -> list[TriggerEvent]:
        """Let virtual time pass with no event; fires any due timers."""
        if to_t <= self.clock:
            return []
        triggers: list[TriggerEvent] = []

        onset_t = self.last_input_t + self.thresholds.idle_threshold
        if self._open is not None and self.clock < onset_t <= to_t:
            self._close_session(self.last_input_t)

        crossing = self.last_input_t + self.thresholds.prolonged_idle_threshold
        if not self._gap_fired and crossing <= to_t:
            fire_t = max(crossing, self.clock)
            self._gap_fired = True
            triggers.append(self._emit(fire_t, PROLONGED_IDLE, {
                "idle_seconds": fire_t - self.last_input_t,
            }))

        if self._pending_recovery is not None and to_t >= self._pending_recovery[1]:
            self._pending_recovery = None

        self.clock = to_t
        return triggers

    def _on_focus(self, event: ActivityEvent) -> list[TriggerEvent]:
        triggers: list[TriggerEvent] = []
        t, app = event.t, event.app_id or ""
        previous = self.current_app
        self.current_app = app
        category = self.classifier.classify(app)

        # sliding thrash window, half-open (t - W, t]
        self._focus_times.append((t, app))
        cutoff = t - self.thresholds.thrash_window_seconds
        while self._focus_times and self._focus_times[0][0] <= cutoff:
            self._focus_times.pop(0)
        if (len(self._focus_times) >= self.thresholds.thrash_n
                and t >= self._thrash_suppress_until):
            apps: list[str] = []
            for _, a in self._focus_times:
                if a not in apps:
                    apps.append(a)
            triggers.append(self._emit(t, CONTEXT_THRASH, {
                "switch_count": len(self._focus_times),
                "apps_involved": apps,
            }))
            self._thrash_suppress_until = t + self.thresholds.thrash_cooldown_seconds

        if (self._pending_recovery is not None and category in DEV_CATEGORIES
                and t < self._pending_recovery[1]):
            anchor, _ = self._pending_recovery
            self._pending_recovery = None
            triggers.append(self._emit(t, RECOVERY, {
                "recovered_within": t - anchor,
                "apps_involved": [app],
            }))

        if self._open is not None:
            if category in DEV_CATEGORIES:
                if app != previous:
                    self._open.switch_count += 1
                self._open.cut(t, app)
            else:
                self._close_session(t)
        elif (category in DEV_CATEGORIES
              and t - self.last_input_t < self.thresholds.idle_threshold):
            self._open = _OpenSession(start_t=t, seg_start=t, seg_app=app)

        return triggers

    def _try_recover_at(self, t: float, anchor: float) -> TriggerEvent | None:
        if self.current_app is None:
            apps: list[str] = []
        elif self.classifier.classify(self.current_app) in DEV_CATEGORIES:
            apps = [self.current_app]
        else:
            return None
        return self._emit(t, RECOVERY, {"recovered_within": t - anchor,
                                        "apps_involved": apps})

    def _emit(self, t: float, kind: str, context: dict) -> TriggerEvent:
        self._trigger_seq += 1
        return TriggerEvent(trigger_id=f"trg-{self._trigger_seq}", t=t, kind=kind,
                            context=context)

    # --- sessions -------------------------------------------------------------

    def _close_session(self, end_t: float) -> None:
        open_ = self._open
        self._open = None
        if open_ is None or end_t <= open_.start_t:
            return
        open_.cut(end_t, None)
        dominant = min(
            (a for a in open_.app_seconds),
            key=lambda a: (-open_.app_seconds[a], a),
        )
        self._completed.append(FocusSession(
            start_t=open_.start_t,
            end_t=end_t,
            dominant_app=dominant,
            switch_count=open_.switch_count,
            uninterrupted=open_.switch_count <= self.thresholds.max_switches_per_block,
        ))

    def close_sessions(self, now: float) -> list[FocusSession]:
        """Advance to now and drain sessions completed so far."""
        self.advance(now)
        done, self._completed = self._completed, []
        return done

    def open_session_info(self) -> dict | None:
        if self._open is None:
            return None
        return {"start_t": self._open.start_t, "app": self._open.seg_app,
                "switch_count": self._open.switch_count}

    # --- state and summaries ----------------------------------------------------

    def state(self, now: float | None = None) -> FocusState:
        now = self.clock if now is None else max(now, self.clock)
        idle = now - self.last_input_t
        if idle >= self.thresholds.away_threshold:
            mode = MODE_AWAY
        elif idle >= self.thresholds.idle_threshold:
            mode = MODE_IDLE
        else:
            mode = MODE_ACTIVE
        return FocusState(mode=mode, last_input_t=self.last_input_t,
                          current_app=self.current_app,
                          session_start_t=self.session_start_t)

    def note_nudge(self, t: float) -> None:
        self.last_nudge_t = t

    def classify_app(self, app_id: str) -> str:
        return self.classifier.classify(app_id)

    def summarize(self, window_seconds: float, now: float) -> ActivitySummary:
        """Aggregate focus and idle time over [now - window_seconds, now).

        Durations attribute the span between consecutive WINDOW_FOCUS events to
        the app focused at the span's start, minus derived idle time. Point
        events (switches) count over (w0, now].
        """
        if window_seconds <= 0:
            raise ValueError("window_seconds must be > 0")
        w0 = max(self.session_start_t, now - window_seconds)
        w1 = now

        idle_ivs = self._idle_intervals(now)
        idle_seconds = _measure(idle_ivs, w0, w1)

        per_app: dict[str, float] = {}
        switch_count = 0
        previous_app: str | None = None
        spans: list[tuple[float, float, str]] = []
        seg_start, seg_app = self.session_start_t, None
        for ev in self._history:
            if ev.t > now:
                break
            if ev.kind != WINDOW_FOCUS:
                continue
            if seg_app is not None:
                spans.append((seg_start, ev.t, seg_app))
            if ev.app_id != previous_app and w0 < ev.t <= w1:
                switch_count += 1
            previous_app = ev.app_id
            seg_start, seg_app = ev.t, ev.app_id
        if seg_app is not None:
            spans.append((seg_start, now, seg_app))

        for start, end, app in spans:
            lo, hi = max(start, w0), min(end, w1)
            if hi <= lo:
                continue
            active = (hi - lo) - _measure(idle_ivs, lo, hi)
            if active > 0:
                per_app[app] = per_app.get(app, 0.0) + active

        per_category: dict[str, float] = {}
        for app, seconds in per_app.items():
            cat = self.classifier.classify(app)
            per_category[cat] = per_category.get(cat, 0.0) + seconds

        return ActivitySummary(
            window_seconds=window_seconds,
            per_app_seconds=per_app,
            per_category_seconds=per_category,
            idle_seconds=idle_seconds,
            switch_count=switch_count,
            last_nudge_t=self.last_nudge_t,
        )

    def _idle_intervals(self, now: float) -> list[tuple[float, float]]:
        """Spans where the derived mode is IDLE or AWAY, up to now."""
        marks = [self.session_start_t]
        for ev in self._history:
            if ev.t > now:
                break
            if ev.kind in ACTIVITY_KINDS:
                marks.append(ev.t)
        out = []
        threshold = self.thresholds.idle_threshold
        for a, b in zip(marks, marks[1:]):
            if b - a > threshold:
                out.append((a + threshold, b))
        if now - marks[-1] > threshold:
            out.append((marks[-1] + threshold, now))
        return out

    # --- restart support ----------------------------------------------------------

    def rehydrate(self, events: list[ActivityEvent]) -> None:
        """Rebuild state from persisted events; triggers and completed sessions
        from the past are discarded, they were already acted on."""
        for ev in events:
            self.ingest(ev)
        self._completed.clear()
