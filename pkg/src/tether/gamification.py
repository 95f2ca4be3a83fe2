"""Points, badges, streaks and theme unlocks, derived as a pure fold over an
ordered GameEvent stream. Every state change is backed by exactly one journal
Award, so points can always be audited as the journal sum.

Rule table:
    R1  +10  uninterrupted completed focus block
    R2   +5  recovery within 120 s of a nudge
    R3   +2  chat check-in, capped at 5 per day
    B1  badge first_focus   first completed block ever
    B2  badge deep_diver    4 blocks in one day
    B3  badge comeback      10 lifetime quick recoveries
    M*  milestones at 100 / 500 / 1000 points, each unlocking one theme
    S*  badges streak_3 / streak_7 / streak_30 at those streak lengths
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, timedelta

from .errors import OrderError

FOCUS_BLOCK_COMPLETED = "FOCUS_BLOCK_COMPLETED"
QUICK_RECOVERY = "QUICK_RECOVERY"
CHAT_CHECKIN = "CHAT_CHECKIN"
DAY_ROLLOVER = "DAY_ROLLOVER"

GAME_EVENT_KINDS = (FOCUS_BLOCK_COMPLETED, QUICK_RECOVERY, CHAT_CHECKIN, DAY_ROLLOVER)

QUICK_RECOVERY_MAX_SECONDS = 120.0
CHECKINS_PER_DAY_CAP = 5
DEEP_DIVER_BLOCKS = 4
COMEBACK_RECOVERIES = 10
STREAK_BADGES = {3: "streak_3", 7: "streak_7", 30: "streak_30"}

# (points threshold, milestone id, unlocked theme)
MILESTONES = (
    (100, "points_100", "ocean"),
    (500, "points_500", "forest"),
    (1000, "points_1000", "sunset"),
)


@dataclass(frozen=True)
class GameEvent:
    t: float
    kind: str
    payload: dict

    def dedupe_key(self) -> str:
        return f"{self.t}|{self.kind}|{json.dumps(self.payload, sort_keys=True)}"

    def to_record(self) -> dict:
        return {"t": self.t, "kind": self.kind, "payload": self.payload}

    @staticmethod
    def from_record(rec: dict) -> "GameEvent":
        return GameEvent(t=float(rec["t"]), kind=rec["kind"], payload=rec.get("payload", {}))


@dataclass(frozen=True)
class Award:
    t: float
    points_delta: int
    reason: str
    badge_id: str | None = None
    milestone_id: str | None = None

    def to_record(self) -> dict:
        rec: dict = {"t": self.t, "points_delta": self.points_delta, "reason": self.reason}
        if self.badge_id:
            rec["badge_id"] = self.badge_id
        if self.milestone_id:
            rec["milestone_id"] = self.milestone_id
        return rec


@dataclass
class GamificationState:
    points: int
    badges: set[str]
    streak_days: int
    last_active_day: str
    unlocked_themes: set[str]
    journal: list[Award]

    def to_view(self) -> dict:
        next_milestone = None
        for threshold, _, theme in MILESTONES:
            if self.points < threshold:
                next_milestone = {"points": threshold, "theme": theme}
                break
        return {
            "points": self.points,
            "badges": sorted(self.badges),
            "streak_days": self.streak_days,
            "last_active_day": self.last_active_day,
            "unlocked_themes": sorted(self.unlocked_themes),
            "next_milestone": next_milestone,
            "journal_length": len(self.journal),
        }


class GamificationEngine:
    """Single writer; apply() is idempotent per unique (t, kind, payload)."""

    def __init__(self, epoch_date: date = date(2026, 1, 1), epoch_offset: float = 0.0):
        self.epoch_date = epoch_date
        self.epoch_offset = epoch_offset
        self.points = 0
        self.badges: set[str] = set()
        self.streak_days = 0
        self.unlocked_themes: set[str] = set()
        self.journal: list[Award] = []
        self.last_event_t = float("-inf")
        self._seen: set[str] = set()
        self._blocks_by_day: dict[int, int] = {}
        self._checkins_by_day: dict[int, int] = {}
        self._recoveries = 0
        self._milestones_hit: set[str] = set()
        self._last_rollover_day: date | None = None

    def day_index(self, t: float) -> int:
        return int((self.epoch_offset + t) // 86400)

    def day_date(self, t: float) -> date:
        return self.epoch_date + timedelta(days=self.day_index(t))

    # --- event fold -----------------------------------------------------------

    def apply(self, event: GameEvent) -> list[Award]:
        if event.t < self.last_event_t:
            raise OrderError(f"game event at t={event.t} older than {self.last_event_t}")
        key = event.dedupe_key()
        if key in self._seen:
            return []
        self._seen.add(key)
        self.last_event_t = event.t

        awards: list[Award] = []
        day = self.day_index(event.t)

        if event.kind == FOCUS_BLOCK_COMPLETED:
            if event.payload.get("uninterrupted", True):
                awards.append(self._award(event.t, 10, "R1"))
                self._blocks_by_day[day] = self._blocks_by_day.get(day, 0) + 1
                if "first_focus" not in self.badges:
                    awards.append(self._award(event.t, 0, "B1", badge_id="first_focus"))
                if (self._blocks_by_day[day] >= DEEP_DIVER_BLOCKS
                        and "deep_diver" not in self.badges):
                    awards.append(self._award(event.t, 0, "B2", badge_id="deep_diver"))
        elif event.kind == QUICK_RECOVERY:
            latency = float(event.payload.get("latency", 0.0))
            if latency <= QUICK_RECOVERY_MAX_SECONDS:
                awards.append(self._award(event.t, 5, "R2"))
                self._recoveries += 1
                if self._recoveries >= COMEBACK_RECOVERIES and "comeback" not in self.badges:
                    awards.append(self._award(event.t, 0, "B3", badge_id="comeback"))
        elif event.kind == CHAT_CHECKIN:
            count = self._checkins_by_day.get(day, 0) + 1
            self._checkins_by_day[day] = count
            if count <= CHECKINS_PER_DAY_CAP:
                awards.append(self._award(event.t, 2, "R3"))
        elif event.kind == DAY_ROLLOVER:
            day_str = event.payload.get("day")
            roll_day = date.fromisoformat(day_str) if day_str else self.day_date(event.t)
            award = self.rollover(roll_day, t=event.t)
            if award is not None:
                awards.append(award)
        else:
            raise ValueError(f"unknown game event kind {event.kind}")

        awards.extend(self._check_milestones(event.t))
        return awards

    def rollover(self, day: date, t: float | None = None) -> Award | None:
        """Advance the streak when a new day begins. The day that just ended
        counts toward the streak iff it had at least one completed block."""
        if self._last_rollover_day is not None and day <= self._last_rollover_day:
            return None
        self._last_rollover_day = day
        ended = day - timedelta(days=1)
        ended_index = (ended - self.epoch_date).days
        if self._blocks_by_day.get(ended_index, 0) >= 1:
            self.streak_days += 1
        else:
            self.streak_days = 0
        badge = STREAK_BADGES.get(self.streak_days)
        if badge and badge not in self.badges:
            at = t if t is not None else (ended_index + 1) * 86400.0 - self.epoch_offset
            return self._award(at, 0, f"S{self.streak_days}", badge_id=badge)
        return None

    def _check_milestones(self, t: float) -> list[Award]:
        out = []
        for threshold, milestone_id, theme in MILESTONES:
            if self.points >= threshold and milestone_id not in self._milestones_hit:
                self._milestones_hit.add(milestone_id)
                self.unlocked_themes.add(theme)
                out.append(self._award(t, 0, f"M{threshold}", milestone_id=milestone_id))
        return out

    def _award(self, t: float, points: int, reason: str, badge_id: str | None = None,
               milestone_id: str | None = None) -> Award:
        award = Award(t=t, points_delta=points, reason=reason, badge_id=badge_id,
                      milestone_id=milestone_id)
        self.points += points
        if badge_id:
            self.badges.add(badge_id)
        self.journal.append(award)
        return award

    # --- snapshots -------------------------------------------------------------

    def state(self) -> GamificationState:
        last_day = (self._last_rollover_day.isoformat()
                    if self._last_rollover_day is not None else self.epoch_date.isoformat())
        return GamificationState(
            points=self.points,
            badges=set(self.badges),
            streak_days=self.streak_days,
            last_active_day=last_day,
            unlocked_themes=set(self.unlocked_themes),
            journal=list(self.journal),
        )

    def load(self, events: list[GameEvent]) -> None:
        for ev in events:
            self.apply(ev)
