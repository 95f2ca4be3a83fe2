"""Notification delivery with cooldown, quiet hours and a daily cap, so
nudges stay low-disruption. Suppressed notifications are journaled with
their reason, never silently dropped.

now is virtual seconds; time-of-day math anchors t=0 to local midnight plus
an epoch offset, which the daemon sets from the wall clock in live mode and
leaves at zero for replay.
"""

from __future__ import annotations

import logging
import re
import shutil
import subprocess
from dataclasses import dataclass

from .config import Policy, parse_quiet_range

logger = logging.getLogger(__name__)

DELIVERED = "DELIVERED"
SUPPRESSED_COOLDOWN = "SUPPRESSED_COOLDOWN"
SUPPRESSED_QUIET = "SUPPRESSED_QUIET"
SUPPRESSED_DAILY_CAP = "SUPPRESSED_DAILY_CAP"

TITLE_CAP = 60
BODY_CAP = 240
ELLIPSIS = "…"

URGENCY_LOW = "LOW"
URGENCY_NORMAL = "NORMAL"

# chat-kind responses bypass delivery policy: the user asked for them
CHAT_KINDS = ("CHAT_REPLY", "EMOTIONAL_CHECKIN")

_MARKUP = re.compile(r"[*_`#>\[\]()|~]")


@dataclass
class Notification:
    id: int
    t: float
    title: str
    body: str
    kind: str
    urgency: str = URGENCY_NORMAL

    def to_record(self) -> dict:
        return {"id": self.id, "t": self.t, "title": self.title, "body": self.body,
                "kind": self.kind, "urgency": self.urgency}


def sanitize(text: str) -> str:
    """Model output is untrusted for OS notification APIs: strip markup
    characters and collapse whitespace before display."""
    return " ".join(_MARKUP.sub("", text).split())


def cap_text(text: str, cap: int) -> str:
    if len(text) <= cap:
        return text
    cut = text[: cap - 1]
    if " " in cut:
        cut = cut[: cut.rfind(" ")].rstrip()
    return cut + ELLIPSIS


class OsNotifyAdapter:
    def show(self, title: str, body: str, urgency: str) -> None:
        raise NotImplementedError


class HeadlessAdapter(OsNotifyAdapter):
    """Writes to the in-app feed only; used by all acceptance tests."""

    def show(self, title: str, body: str, urgency: str) -> None:
        return None


class NotifySendAdapter(OsNotifyAdapter):
    """Linux adapter built on notify-send; failures fall back to the feed."""

    def show(self, title: str, body: str, urgency: str) -> None:
        if shutil.which("notify-send") is None:
            raise OSError("notify-send not found")
        level = "low" if urgency == URGENCY_LOW else "normal"
        subprocess.run(["notify-send", "-u", level, title, body], timeout=3, check=True)


class Notifier:
    def __init__(self, policy: Policy, adapter: OsNotifyAdapter | None = None,
                 epoch_offset: float = 0.0, journal_sink=None):
        self.policy = policy
        self.adapter = adapter or HeadlessAdapter()
        self.epoch_offset = epoch_offset
        self.journal_sink = journal_sink  # callable(record) for persistence
        self.journal: list[dict] = []
        self._feed: list[Notification] = []
        self._last_nudge_t: float | None = None
        self._delivered_by_day: dict[int, int] = {}
        self._next_id = 1

    def set_policy(self, policy: Policy) -> None:
        self.policy = policy

    def build(self, t: float, title: str, body: str, kind: str,
              urgency: str = URGENCY_NORMAL) -> Notification:
        n = Notification(id=self._next_id, t=t, title=cap_text(sanitize(title), TITLE_CAP),
                         body=cap_text(sanitize(body), BODY_CAP), kind=kind, urgency=urgency)
        self._next_id += 1
        return n

    def deliver(self, n: Notification, now: float) -> str:
        if n.kind in CHAT_KINDS:
            result = DELIVERED
        else:
            result = self._policy_check(now)
        if result == DELIVERED:
            if n.kind not in CHAT_KINDS:
                self._last_nudge_t = now
                self._delivered_by_day[self._day(now)] = (
                    self._delivered_by_day.get(self._day(now), 0) + 1)
            self._feed.append(n)
            try:
                self.adapter.show(n.title, n.body, n.urgency)
            except Exception as e:
                # OS facility failed; the in-app feed already has it, which
                # still counts as delivered
                logger.warning("os notify failed, feed-only fallback: %s", e)
        self._journal(n, now, result)
        return result

    def _policy_check(self, now: float) -> str:
        if (self._last_nudge_t is not None
                and now - self._last_nudge_t < self.policy.nudge_cooldown_seconds):
            return SUPPRESSED_COOLDOWN
        if self._in_quiet_hours(now):
            return SUPPRESSED_QUIET
        if self._delivered_by_day.get(self._day(now), 0) >= self.policy.max_nudges_per_day:
            return SUPPRESSED_DAILY_CAP
        return DELIVERED

    def _in_quiet_hours(self, now: float) -> bool:
        tod = (self.epoch_offset + now) % 86400
        for spec in self.policy.quiet_hours:
            start, end = parse_quiet_range(spec)
            if start < end:
                if start <= tod < end:
                    return True
            elif tod >= start or tod < end:
                return True
        return False

    def _day(self, now: float) -> int:
        return int((self.epoch_offset + now) // 86400)

    def _journal(self, n: Notification, now: float, result: str) -> None:
        entry = {"notification": n.to_record(), "delivered_at": now, "result": result}
        self.journal.append(entry)
        if self.journal_sink is not None:
            self.journal_sink(entry)

    def feed(self, since: float) -> list[Notification]:
        return [n for n in self._feed if n.t > since]

    def feed_after_id(self, since_id: int) -> list[Notification]:
        return [n for n in self._feed if n.id > since_id]

    def last_delivered_nudge_t(self) -> float | None:
        return self._last_nudge_t

    def load(self, journal_records: list[dict]) -> None:
        """Rebuild delivery state from persisted journal entries."""
        for entry in journal_records:
            rec = entry["notification"]
            n = Notification(id=rec["id"], t=rec["t"], title=rec["title"], body=rec["body"],
                             kind=rec["kind"], urgency=rec.get("urgency", URGENCY_NORMAL))
            self._next_id = max(self._next_id, n.id + 1)
            self.journal.append(entry)
            if entry["result"] == DELIVERED:
                self._feed.append(n)
                if n.kind not in CHAT_KINDS:
                    now = entry["delivered_at"]
                    self._last_nudge_t = now
                    self._delivered_by_day[self._day(now)] = (
                        self._delivered_by_day.get(self._day(now), 0) + 1)
