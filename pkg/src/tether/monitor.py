"""Desktop activity signals: the event model, trace files, replay, and the
live sampler with pluggable platform adapters.

Events come from exactly one of two mutually exclusive sources: a live
platform adapter polled once per second, or a trace file replayed for
headless deterministic runs. Both feed the same ordered stream.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
import subprocess
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

from .errors import ClockSkew, OrderError, ParseError, PlatformUnavailable, SinkClosed, VersionError

logger = logging.getLogger(__name__)

TRACE_VERSION = 1

WINDOW_FOCUS = "WINDOW_FOCUS"
INPUT_BURST = "INPUT_BURST"
IDLE_START = "IDLE_START"
IDLE_END = "IDLE_END"

EVENT_KINDS = (WINDOW_FOCUS, INPUT_BURST, IDLE_START, IDLE_END)

# Event kinds that mean "the user produced input up to this t". WINDOW_FOCUS is
# deliberately excluded: focus can change without user input (dialog steal).
ACTIVITY_KINDS = (INPUT_BURST, IDLE_START, IDLE_END)
# Kinds that close an idle gap (input came back).
RESUME_KINDS = (INPUT_BURST, IDLE_END)


@dataclass(frozen=True)
class ActivityEvent:
    t: float
    kind: str
    app_id: str | None = None
    window_title: str | None = None
    keys: int | None = None
    clicks: int | None = None

    def validate(self) -> None:
        if self.t < 0:
            raise ParseError(f"negative t {self.t}")
        if self.kind not in EVENT_KINDS:
            raise ParseError(f"unknown event kind {self.kind!r}")
        has_window = self.app_id is not None or self.window_title is not None
        has_input = self.keys is not None or self.clicks is not None
        if self.kind == WINDOW_FOCUS:
            if self.app_id is None or self.window_title is None or has_input:
                raise ParseError("WINDOW_FOCUS carries app_id and window_title only")
        elif self.kind == INPUT_BURST:
            if self.keys is None or self.clicks is None or has_window:
                raise ParseError("INPUT_BURST carries keys and clicks only")
            if self.keys < 0 or self.clicks < 0:
                raise ParseError("keys/clicks must be >= 0")
        elif has_window or has_input:
            raise ParseError(f"{self.kind} carries no payload fields")

    def to_record(self) -> dict:
        rec: dict = {"t": self.t, "kind": self.kind}
        if self.kind == WINDOW_FOCUS:
            rec["app_id"] = self.app_id
            rec["window_title"] = self.window_title
        elif self.kind == INPUT_BURST:
            rec["keys"] = self.keys
            rec["clicks"] = self.clicks
        return rec

    @staticmethod
    def from_record(rec: dict) -> "ActivityEvent":
        if not isinstance(rec, dict) or "t" not in rec or "kind" not in rec:
            raise ParseError("event record needs 't' and 'kind'")
        t = rec["t"]
        if not isinstance(t, (int, float)) or isinstance(t, bool):
            raise ParseError("'t' must be a number")
        ev = ActivityEvent(
            t=float(t),
            kind=rec["kind"],
            app_id=rec.get("app_id"),
            window_title=rec.get("window_title"),
            keys=rec.get("keys"),
            clicks=rec.get("clicks"),
        )
        ev.validate()
        return ev


@dataclass
class Trace:
    version: int
    bucket_seconds: float
    created_at: str
    events: list[ActivityEvent] = field(default_factory=list)

    @property
    def virtual_duration(self) -> float:
        return self.events[-1].t if self.events else 0.0


def redact_event(event: ActivityEvent) -> ActivityEvent:
    """Replace the window title with a stable one-way digest."""
    if event.kind != WINDOW_FOCUS or event.window_title is None:
        return event
    return replace(event, window_title=title_digest(event.window_title))


def title_digest(title: str) -> str:
    return "t:" + hashlib.sha256(title.encode("utf-8")).hexdigest()[:16]


# --- trace files -------------------------------------------------------------

def load_trace(path: str | Path) -> Trace:
    """Parse a line-delimited trace file: header object first, one event per line."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ParseError(f"cannot read trace {path}: {e}")
    if not lines or not lines[0].strip():
        raise ParseError("trace file is empty", line=1)

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ParseError(f"bad header: {e}", line=1)
    if not isinstance(header, dict) or "version" not in header:
        raise ParseError("header must be an object with 'version'", line=1)
    if header["version"] != TRACE_VERSION:
        raise VersionError(f"unsupported trace version {header['version']!r}")

    events: list[ActivityEvent] = []
    idle_open = False
    last_t = None
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ParseError(f"line {lineno}: {e}", line=lineno)
        try:
            ev = ActivityEvent.from_record(rec)
        except ParseError as e:
            raise ParseError(f"line {lineno}: {e.message}", line=lineno)
        if last_t is not None and ev.t < last_t:
            raise OrderError(f"line {lineno}: t decreases ({ev.t} < {last_t})", line=lineno)
        if ev.kind == IDLE_START:
            if idle_open:
                raise ParseError(f"line {lineno}: IDLE_START while idle already open", line=lineno)
            idle_open = True
        elif ev.kind == IDLE_END:
            if not idle_open:
                raise ParseError(f"line {lineno}: IDLE_END without IDLE_START", line=lineno)
            idle_open = False
        last_t = ev.t
        events.append(ev)

    return Trace(
        version=header["version"],
        bucket_seconds=float(header.get("bucket_seconds", 10.0)),
        created_at=str(header.get("created_at", "")),
        events=events,
    )


def write_trace(trace: Trace, path: str | Path) -> None:
    header = {"version": trace.version, "bucket_seconds": trace.bucket_seconds,
              "created_at": trace.created_at}
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for ev in trace.events:
            f.write(json.dumps(ev.to_record(), sort_keys=True) + "\n")


@dataclass
class ReplayReport:
    events_emitted: int
    virtual_duration: float


def replay(trace: Trace, sink: Callable[[ActivityEvent], None],
           speed: float | str = "instant") -> ReplayReport:
    """Deliver trace events to the sink in t order.

    With speed="instant" no wall time passes; virtual timestamps are preserved
    so downstream timing logic behaves exactly as in real time. A numeric
    speed sleeps the inter-event gaps divided by that multiplier.
    """
    if speed != "instant" and (not isinstance(speed, (int, float)) or speed <= 0):
        raise ValueError("speed must be a positive number or 'instant'")
    prev_t = None
    emitted = 0
    for ev in trace.events:
        if speed != "instant" and prev_t is not None and ev.t > prev_t:
            time.sleep((ev.t - prev_t) / float(speed))
        try:
            sink(ev)
        except SinkClosed:
            raise
        except Exception as e:
            raise SinkClosed(f"sink failed at t={ev.t}: {e}") from e
        prev_t = ev.t
        emitted += 1
    return ReplayReport(events_emitted=emitted, virtual_duration=trace.virtual_duration)


# --- live sampling -----------------------------------------------------------

@dataclass
class PlatformSample:
    app_id: str | None
    window_title: str | None
    keys_delta: int
    clicks_delta: int


class PlatformAdapter:
    """One per OS. snapshot() reports the focused window and input deltas
    since the previous call; raise PlatformUnavailable if the OS cannot be
    queried."""

    def snapshot(self) -> PlatformSample:
        raise NotImplementedError


class X11Adapter(PlatformAdapter):
    """Reference adapter for X11 desktops, built on xdotool and xprintidle.

    xprintidle only exposes time-since-last-input, so key/click counts are a
    lower bound: each poll in which the idle counter reset is recorded as one
    key. Exact counts need an input hook, which this adapter does not install.
    """

    def __init__(self):
        self._last_idle_ms: int | None = None
        self._available = shutil.which("xdotool") is not None

    def snapshot(self) -> PlatformSample:
        if not self._available:
            raise PlatformUnavailable("xdotool not found on PATH")
        app_id, title = self._active_window()
        keys = 0
        idle_ms = self._idle_ms()
        if idle_ms is not None:
            if self._last_idle_ms is not None and idle_ms < self._last_idle_ms:
                keys = 1
            self._last_idle_ms = idle_ms
        return PlatformSample(app_id=app_id, window_title=title, keys_delta=keys, clicks_delta=0)

    def _active_window(self) -> tuple[str | None, str | None]:
        try:
            out = subprocess.run(
                ["xdotool", "getactivewindow", "getwindowname", "getwindowclassname"],
                capture_output=True, text=True, timeout=2,
            )
        except (subprocess.SubprocessError, OSError) as e:
            raise PlatformUnavailable(f"xdotool failed: {e}")
        if out.returncode != 0:
            return None, None
        lines = out.stdout.splitlines()
        title = lines[0].strip() if lines else None
        app = lines[1].strip().lower() if len(lines) > 1 else None
        return app, title

    def _idle_ms(self) -> int | None:
        if shutil.which("xprintidle") is None:
            return None
        try:
            out = subprocess.run(["xprintidle"], capture_output=True, text=True, timeout=2)
            return int(out.stdout.strip()) if out.returncode == 0 else None
        except (subprocess.SubprocessError, OSError, ValueError):
            return None


class LiveMonitor:
    """Polls a platform adapter and turns raw samples into ActivityEvents.

    WINDOW_FOCUS is emitted only when the focused app or window changed;
    input deltas are accumulated and flushed as one INPUT_BURST per elapsed
    bucket (counts only, never content). Buckets with zero input emit
    nothing, which is what lets idle gaps appear downstream.
    """

    def __init__(self, adapter: PlatformAdapter, bucket_seconds: float = 10.0,
                 redact_titles: bool = False):
        self.adapter = adapter
        self.bucket_seconds = bucket_seconds
        self.redact_titles = redact_titles
        self.input_only = False
        self._last_app: str | None = None
        self._last_title: str | None = None
        self._last_t: float | None = None
        self._bucket_start = 0.0
        self._keys = 0
        self._clicks = 0

    def capture_sample(self, now: float) -> list[ActivityEvent]:
        if self._last_t is not None and now < self._last_t:
            logger.warning("clock skew: sample at %.3f is older than %.3f, dropped",
                           now, self._last_t)
            raise ClockSkew(f"sample at {now} precedes {self._last_t}")
        if self._last_t is None:
            self._bucket_start = now

        events: list[ActivityEvent] = []
        try:
            sample = self.adapter.snapshot()
        except PlatformUnavailable:
            if not self.input_only:
                logger.warning("platform adapter unavailable, degrading to input-only mode")
                self.input_only = True
            sample = PlatformSample(None, None, 0, 0)

        # flush every bucket boundary crossed since the last sample
        while now - self._bucket_start >= self.bucket_seconds:
            self._bucket_start += self.bucket_seconds
            if self._keys or self._clicks:
                events.append(ActivityEvent(t=self._bucket_start, kind=INPUT_BURST,
                                            keys=self._keys, clicks=self._clicks))
                self._keys = 0
                self._clicks = 0

        self._keys += max(0, sample.keys_delta)
        self._clicks += max(0, sample.clicks_delta)

        if sample.app_id is not None and not self.input_only:
            if (sample.app_id, sample.window_title) != (self._last_app, self._last_title):
                ev = ActivityEvent(t=now, kind=WINDOW_FOCUS, app_id=sample.app_id,
                                   window_title=sample.window_title or "")
                if self.redact_titles:
                    ev = redact_event(ev)
                events.append(ev)
                self._last_app, self._last_title = sample.app_id, sample.window_title

        self._last_t = now
        events.sort(key=lambda e: e.t)
        return events


def validate_stream_order(events: Iterable[ActivityEvent]) -> None:
    last = None
    for ev in events:
        if last is not None and ev.t < last:
            raise OrderError(f"event at t={ev.t} after t={last}")
        last = ev.t
