"""Independent brute-force oracles used to derive and check expected values.

These deliberately share no code with the package: the trigger oracle is a
whole-trace scan rather than an incremental state machine, retrieval is a
plain exhaustive loop, and the delivery oracle replays the policy rules over
a flat timeline. Where the package must agree exactly, both sides use plain
sequential float arithmetic.
"""

from __future__ import annotations

import fnmatch
import math
import zlib

ACTIVITY = ("INPUT_BURST", "IDLE_START", "IDLE_END")
RESUME = ("INPUT_BURST", "IDLE_END")
DEV = ("IDE", "TERMINAL")


def classify(app_id: str, rules: list[tuple[str, str]]) -> str:
    low = (app_id or "").lower()
    for pattern, category in rules:
        if fnmatch.fnmatchcase(low, pattern.lower()):
            return category
    return "OTHER"


def trigger_oracle(events: list[dict], th, rules: list[tuple[str, str]]) -> list[tuple]:
    """Expected (kind, t, detail) triggers for a trace, by exhaustive scan.

    events are to_record() dicts in stream order. th is a Thresholds-like
    object. detail is idle_seconds / switch_count / recovered_within.
    """
    out: list[tuple] = []
    final_t = events[-1]["t"] if events else 0.0

    # --- prolonged idle: scan gaps between activity markers (implicit 0 start)
    marks = [(0.0, None, -1)]  # (t, kind, index)
    for i, ev in enumerate(events):
        if ev["kind"] in ACTIVITY:
            marks.append((ev["t"], ev["kind"], i))
    gaps = []  # (start_t, close_t or None, closing kind, closing index)
    for (a, _, _), (b, kind_b, idx_b) in zip(marks, marks[1:]):
        gaps.append((a, b, kind_b, idx_b))
    gaps.append((marks[-1][0], None, None, None))  # trailing open gap

    for start, close_t, close_kind, close_idx in gaps:
        horizon = close_t if close_t is not None else final_t
        if horizon - start >= th.prolonged_idle_threshold:
            fire_t = start + th.prolonged_idle_threshold
            out.append(("PROLONGED_IDLE", fire_t, th.prolonged_idle_threshold))
            # --- recovery for this gap
            if close_t is not None and close_kind in RESUME:
                app = _app_before(events, close_idx)
                if app is None or classify(app, rules) in DEV:
                    out.append(("RECOVERY", close_t, close_t - fire_t))
                else:
                    deadline = close_t + th.recovery_window_seconds
                    for ev in events[close_idx + 1:]:
                        if ev["t"] >= deadline:
                            break
                        if (ev["kind"] == "WINDOW_FOCUS"
                                and classify(ev["app_id"], rules) in DEV):
                            out.append(("RECOVERY", ev["t"], ev["t"] - fire_t))
                            break

    # --- context thrash: sliding window over focus events
    suppress_until = 0.0
    window: list[float] = []
    for ev in events:
        if ev["kind"] != "WINDOW_FOCUS":
            continue
        f = ev["t"]
        window.append(f)
        window = [t for t in window if t > f - th.thrash_window_seconds]
        if len(window) >= th.thrash_n and f >= suppress_until:
            out.append(("CONTEXT_THRASH", f, len(window)))
            suppress_until = f + th.thrash_cooldown_seconds

    return sorted(out, key=lambda x: (x[1], x[0]))


def _app_before(events: list[dict], index: int) -> str | None:
    app = None
    for ev in events[:index]:
        if ev["kind"] == "WINDOW_FOCUS":
            app = ev["app_id"]
    return app


def summary_oracle(events: list[dict], window_seconds: float, now: float, th,
                   rules: list[tuple[str, str]]) -> dict:
    """Interval-arithmetic aggregation over [now - window_seconds, now)."""
    w0, w1 = max(0.0, now - window_seconds), now

    marks = [0.0] + [ev["t"] for ev in events if ev["kind"] in ACTIVITY and ev["t"] <= now]
    idle = []
    for a, b in zip(marks, marks[1:]):
        if b - a > th.idle_threshold:
            idle.append((a + th.idle_threshold, b))
    if now - marks[-1] > th.idle_threshold:
        idle.append((marks[-1] + th.idle_threshold, now))

    def clip_len(a, b, lo, hi):
        s, e = max(a, lo), min(b, hi)
        return max(0.0, e - s)

    idle_seconds = sum(clip_len(a, b, w0, w1) for a, b in idle)

    focuses = [(ev["t"], ev["app_id"]) for ev in events
               if ev["kind"] == "WINDOW_FOCUS" and ev["t"] <= now]
    per_app: dict[str, float] = {}
    switch_count = 0
    prev_app = None
    for i, (t, app) in enumerate(focuses):
        if app != prev_app and w0 < t <= w1:
            switch_count += 1
        prev_app = app
        end = focuses[i + 1][0] if i + 1 < len(focuses) else now
        span = clip_len(t, end, w0, w1)
        covered = sum(clip_len(max(t, a), min(end, b), w0, w1) for a, b in idle
                      if min(end, b) > max(t, a))
        active = span - covered
        if active > 0:
            per_app[app] = per_app.get(app, 0.0) + active

    per_cat: dict[str, float] = {}
    for app, secs in per_app.items():
        cat = classify(app, rules)
        per_cat[cat] = per_cat.get(cat, 0.0) + secs
    return {"per_app": per_app, "per_category": per_cat,
            "idle_seconds": idle_seconds, "switch_count": switch_count}


# --- retrieval ----------------------------------------------------------------

def bag_of_words_embedding(text: str, dim: int = 256) -> list[float]:
    """The documented stub formula, computed directly."""
    counts = [0.0] * dim
    tokens = text.lower().split()
    if not tokens:
        tokens = [""]
    for tok in tokens:
        counts[zlib.crc32(tok.encode("utf-8")) % dim] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return [c / norm for c in counts]


def exhaustive_topk(chunks: list[tuple[str, int, list[float]]], query_vec: list[float],
                    k: int, min_score: float) -> list[tuple[str, int, float]]:
    """chunks are (doc_id, chunk_index, embedding). Returns ranked
    (doc_id, chunk_index, score) exactly as the contract orders them."""
    scored = []
    for doc_id, chunk_index, vec in chunks:
        score = sum(a * b for a, b in zip(query_vec, vec))
        if score >= min_score:
            scored.append((doc_id, chunk_index, score))
    scored.sort(key=lambda row: (-row[2], row[0], row[1]))
    return scored[:k]


def chunk_spans_oracle(length: int, size: int, overlap: int) -> list[tuple[int, int]]:
    """Recompute spans by stepping size - overlap from zero."""
    spans = []
    step = size - overlap
    pos = 0
    while True:
        end = min(pos + size, length)
        spans.append((pos, end))
        if end == length:
            return spans
        pos += step


# --- delivery policy -----------------------------------------------------------

def delivery_oracle(attempts: list[tuple[float, str]], policy, epoch_offset: float = 0.0
                    ) -> list[str]:
    """Expected deliver() results for (now, kind) attempts in time order."""
    from tether.config import parse_quiet_range

    results = []
    last_nudge = None
    per_day: dict[int, int] = {}
    for now, kind in attempts:
        if kind in ("CHAT_REPLY", "EMOTIONAL_CHECKIN"):
            results.append("DELIVERED")
            continue
        tod = (epoch_offset + now) % 86400
        day = int((epoch_offset + now) // 86400)
        if last_nudge is not None and now - last_nudge < policy.nudge_cooldown_seconds:
            results.append("SUPPRESSED_COOLDOWN")
            continue
        quiet = False
        for spec in policy.quiet_hours:
            s, e = parse_quiet_range(spec)
            if (s < e and s <= tod < e) or (s >= e and (tod >= s or tod < e)):
                quiet = True
                break
        if quiet:
            results.append("SUPPRESSED_QUIET")
            continue
        if per_day.get(day, 0) >= policy.max_nudges_per_day:
            results.append("SUPPRESSED_DAILY_CAP")
            continue
        results.append("DELIVERED")
        last_nudge = now
        per_day[day] = per_day.get(day, 0) + 1
    return results


# --- gamification fold -----------------------------------------------------------

def gamification_fold_oracle(events: list[dict]) -> dict:
    """Hand-rolled fold of the rule table; returns points/badges/streak."""
    points = 0
    badges: set[str] = set()
    streak = 0
    blocks_by_day: dict[int, int] = {}
    checkins_by_day: dict[int, int] = {}
    recoveries = 0
    themes: set[str] = set()
    seen = set()
    last_roll = None
    for ev in events:
        key = (ev["t"], ev["kind"], str(sorted(ev.get("payload", {}).items())))
        if key in seen:
            continue
        seen.add(key)
        day = int(ev["t"] // 86400)
        kind = ev["kind"]
        payload = ev.get("payload", {})
        if kind == "FOCUS_BLOCK_COMPLETED" and payload.get("uninterrupted", True):
            points += 10
            blocks_by_day[day] = blocks_by_day.get(day, 0) + 1
            badges.add("first_focus")
            if blocks_by_day[day] >= 4:
                badges.add("deep_diver")
        elif kind == "QUICK_RECOVERY" and payload.get("latency", 0) <= 120:
            points += 5
            recoveries += 1
            if recoveries >= 10:
                badges.add("comeback")
        elif kind == "CHAT_CHECKIN":
            checkins_by_day[day] = checkins_by_day.get(day, 0) + 1
            if checkins_by_day[day] <= 5:
                points += 2
        elif kind == "DAY_ROLLOVER":
            roll_day = payload.get("day")
            if roll_day == last_roll:
                continue
            last_roll = roll_day
            ended_day = day - 1
            if blocks_by_day.get(ended_day, 0) >= 1:
                streak += 1
            else:
                streak = 0
            if streak in (3, 7, 30):
                badges.add(f"streak_{streak}")
        for threshold, theme in ((100, "ocean"), (500, "forest"), (1000, "sunset")):
            if points >= threshold:
                themes.add(theme)
    return {"points": points, "badges": badges, "streak_days": streak, "themes": themes}
