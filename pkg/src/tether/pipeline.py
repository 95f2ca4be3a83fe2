"""The assembled daemon core: one object that owns the store and all engines
and runs the trigger pipeline (trigger -> summarize -> retrieve -> compose ->
generate -> route).

All engine state is mutated under one lock, in virtual-time order, which is
what makes instant replay byte-deterministic: the same trace and config
always produce the same persisted journal after the manifest. Game events
derived out of band (session blocks, day rollovers, chat check-ins) are
clamped to never step behind the gamification clock.
"""

from __future__ import annotations

import logging
import queue
import secrets
import threading
import time
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

from . import composer as composer_mod
from .composer import Composer, select_response_type
from .config import TetherConfig, apply_settings, settings_view
from .errors import EmbedFailed, TetherError
from .focus import (
    PROLONGED_IDLE,
    RECOVERY,
    USER_MESSAGE,
    AppClassifier,
    FocusEngine,
    FocusSession,
    TriggerEvent,
)
from .gamification import (
    CHAT_CHECKIN,
    DAY_ROLLOVER,
    FOCUS_BLOCK_COMPLETED,
    QUICK_RECOVERY,
    QUICK_RECOVERY_MAX_SECONDS,
    GameEvent,
    GamificationEngine,
)
from .gateway import Gateway, GenerationRequest
from .monitor import ActivityEvent, Trace, redact_event, replay
from .notify import DELIVERED, URGENCY_LOW, URGENCY_NORMAL, HeadlessAdapter, Notifier, OsNotifyAdapter
from .rag import Document, RagEngine, SOURCE_REFERENCE
from .store import ROLE_ASSISTANT, ROLE_SYSTEM, ROLE_USER, ChatMessage, Store

logger = logging.getLogger(__name__)

NOTIFICATION_TITLES = {
    "NUDGE": "Gentle nudge",
    "NUDGE_CELEBRATE": "Nice recovery!",
    "TASK_SUGGESTION": "Pick one anchor task",
    "EMOTIONAL_CHECKIN": "Checking in",
    "CHAT_REPLY": "Reply ready",
}


@dataclass
class ReplaySummary:
    events_emitted: int
    virtual_duration: float
    triggers: int
    nudges_delivered: int


class TetherApp:
    def __init__(self, config: TetherConfig, data_dir: str | Path | None = None,
                 os_adapter: OsNotifyAdapter | None = None, live_clock: bool = False,
                 epoch_date: str | None = None, epoch_offset: float = 0.0):
        self.config = config
        self.data_dir = Path(data_dir) if data_dir else config.resolved_data_dir()
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.live_clock = live_clock
        self._start_mono = time.monotonic()
        self._virtual_t = 0.0
        self._lock = threading.RLock()

        self.store = Store(self.data_dir / "tether.store", epoch_date=epoch_date,
                           epoch_offset=epoch_offset, retention_days=config.retention_days)
        stored_settings = self.store.settings.get("live_settings")
        if stored_settings:
            try:
                self.config = apply_settings(self.config, stored_settings)
            except TetherError as e:
                logger.warning("ignoring bad persisted settings: %s", e)

        epoch = self.store.manifest
        self.gateway = Gateway(self.config.provider)
        self.rag = RagEngine(self.gateway, self.config.rag, persist=self.store.put_document)
        for payload in self.store.docs.values():
            self.rag.load_payload(payload)

        # without dev-awareness every app classifies OTHER: no dev sessions,
        # no focus blocks, recovery falls back to the unknown-context rule
        rules = self.config.app_rules if self.config.capabilities.dev_aware else []
        classifier = AppClassifier(rules)
        self.focus = FocusEngine(self.config.thresholds, classifier)
        self.focus.rehydrate([ActivityEvent.from_record(r) for r in self.store.events])

        self.gamification = GamificationEngine(
            epoch_date=date.fromisoformat(epoch["epoch_date"]),
            epoch_offset=float(epoch.get("epoch_offset", 0.0)))
        self.gamification.load([GameEvent.from_record(r) for r in self.store.game_events])

        self.notifier = Notifier(self.config.policy, adapter=os_adapter or HeadlessAdapter(),
                                 epoch_offset=float(epoch.get("epoch_offset", 0.0)),
                                 journal_sink=self.store.append_notification)
        loaded_notes, self.notifier.journal_sink = self.store.notifications, None
        self.notifier.load(loaded_notes)
        self.notifier.journal_sink = self.store.append_notification

        self.composer = Composer(
            assets_dir=self.config.assets_dir or None,
            prompt_char_budget=self.config.composer.prompt_char_budget,
            history_limit=self.config.composer.history_limit,
            retrieval_k=self.config.rag.k,
            lexicon=self.config.checkin_lexicon,
        )

        self.trigger_log: list[TriggerEvent] = []
        self._subscribers: list[queue.Queue] = []
        self._day_cursor = self.gamification.day_index(0.0)
        self._last_idle_nudge: tuple[float, bool] | None = None  # (trigger t, delivered)
        if self.store.events:
            last_t = self.store.events[-1].get("t", 0.0)
            self._virtual_t = last_t
            self._day_cursor = self.gamification.day_index(last_t)

    # --- clock -----------------------------------------------------------------

    def now(self) -> float:
        wall = time.monotonic() - self._start_mono if self.live_clock else 0.0
        return max(self._virtual_t, wall)

    def _advance_virtual(self, t: float) -> None:
        self._virtual_t = max(self._virtual_t, t)

    # --- event pipeline ---------------------------------------------------------

    def handle_event(self, event: ActivityEvent) -> None:
        with self._lock:
            if self.config.redact_titles:
                event = redact_event(event)
            self.store.append_event(event.to_record())
            triggers = self.focus.ingest(event)
            self._advance_virtual(event.t)
            sessions = self.focus.close_sessions(event.t)
            self._run_timeline(event.t, triggers, sessions)

    def _run_timeline(self, now_t: float, triggers: list[TriggerEvent],
                      sessions: list[FocusSession]) -> None:
        """Apply rollovers, session blocks and trigger handling in t order."""
        actions: list[tuple[float, int, object]] = []
        for boundary_t, day_iso in self._pending_rollovers(now_t):
            actions.append((boundary_t, 0, GameEvent(
                t=boundary_t, kind=DAY_ROLLOVER, payload={"day": day_iso})))
        for sess in sessions:
            for block in self._session_blocks(sess):
                actions.append((block.t, 1, block))
        for trig in triggers:
            actions.append((trig.t, 2, trig))
        actions.sort(key=lambda a: (a[0], a[1]))
        for _, _, item in actions:
            if isinstance(item, GameEvent):
                self._apply_game(item)
            else:
                self._process_trigger(item)

    def _pending_rollovers(self, t: float) -> list[tuple[float, str]]:
        out = []
        target = self.gamification.day_index(t)
        while self._day_cursor < target:
            self._day_cursor += 1
            boundary_t = self._day_cursor * 86400.0 - self.gamification.epoch_offset
            day_iso = (self.gamification.epoch_date
                       + timedelta(days=self._day_cursor)).isoformat()
            out.append((boundary_t, day_iso))
        return out

    def _session_blocks(self, sess: FocusSession) -> list[GameEvent]:
        if not self.config.capabilities.gamified or not sess.uninterrupted:
            return []
        block_len = self.config.thresholds.focus_block_seconds
        count = int(sess.duration // block_len)
        return [
            GameEvent(t=sess.end_t, kind=FOCUS_BLOCK_COMPLETED, payload={
                "session_start": sess.start_t,
                "block_index": i,
                "block_seconds": block_len,
                "uninterrupted": True,
            })
            for i in range(count)
        ]

    def _apply_game(self, event: GameEvent) -> None:
        if not self.config.capabilities.gamified:
            return
        if event.t < self.gamification.last_event_t:
            event = GameEvent(t=self.gamification.last_event_t, kind=event.kind,
                              payload=event.payload)
        self.store.append_game_event(event.to_record())
        self.gamification.apply(event)

    # --- trigger handling -----------------------------------------------------------

    def _process_trigger(self, trig: TriggerEvent) -> None:
        self.store.append_trigger(trig.to_record())
        self.trigger_log.append(trig)

        if trig.kind == RECOVERY:
            self._note_recovery(trig)

        response_type, route, celebratory = select_response_type(
            trig, self.config.checkin_lexicon)
        if route != composer_mod.ROUTE_NOTIFICATION:
            return  # chat-routed triggers are handled by post_chat

        summary = self.focus.summarize(self.config.thresholds.summary_window_seconds,
                                       now=trig.t)
        query_text = composer_mod.describe_input(trig, self.focus.current_app)
        retrieved = self._safe_query(query_text)
        history = self._recent_history()
        bundle = self.composer.compose_as(trig, response_type, route, celebratory,
                                          summary, retrieved, history,
                                          current_app=self.focus.current_app)
        prompt = self.composer.render(bundle)
        try:
            result = self.gateway.generate(GenerationRequest(
                rendered_prompt=prompt,
                max_output_chars=self.config.composer.max_output_chars,
                temperature=self.config.composer.nudge_temperature,
            ))
        except TetherError as e:
            logger.warning("generation failed for %s: %s", trig.trigger_id, e.message)
            return

        title_key = "NUDGE_CELEBRATE" if celebratory else response_type
        urgency = URGENCY_LOW if response_type == "NUDGE" else URGENCY_NORMAL
        note = self.notifier.build(t=trig.t, title=NOTIFICATION_TITLES[title_key],
                                   body=result.text, kind=response_type, urgency=urgency)
        outcome = self.notifier.deliver(note, now=trig.t)

        if trig.kind == PROLONGED_IDLE:
            self._last_idle_nudge = (trig.t, outcome == DELIVERED)
        if outcome == DELIVERED:
            self.focus.note_nudge(trig.t)
            self.store.append_message(t=trig.t, role=ROLE_SYSTEM,
                                      text=composer_mod.describe_input(trig, self.focus.current_app),
                                      response_type=response_type,
                                      linked_trigger_id=trig.trigger_id)
            self._broadcast(note.to_record())

    def _note_recovery(self, trig: TriggerEvent) -> None:
        if self._last_idle_nudge is None:
            return
        nudge_t, delivered = self._last_idle_nudge
        latency = trig.t - nudge_t
        if delivered and latency <= QUICK_RECOVERY_MAX_SECONDS:
            self._apply_game(GameEvent(t=trig.t, kind=QUICK_RECOVERY,
                                       payload={"latency": latency}))
        self._last_idle_nudge = None

    def _safe_query(self, text: str):
        if not self.config.capabilities.rag:
            return []
        try:
            return self.rag.query(text)
        except TetherError as e:
            logger.warning("retrieval failed: %s", e.message)
            return []

    def _recent_history(self) -> list[tuple[str, str]]:
        msgs = self.store.list_messages(limit=self.config.composer.history_limit)
        return [(m.role, m.text) for m in reversed(msgs)]

    # --- chat ------------------------------------------------------------------------

    def post_chat(self, text: str) -> tuple[int, ChatMessage]:
        if not isinstance(text, str) or not (1 <= len(text) <= 4000):
            raise TetherError("text must be 1..4000 chars")
        with self._lock:
            now = self.now()
            self._advance_virtual(now)
            for boundary_t, day_iso in self._pending_rollovers(now):
                self._apply_game(GameEvent(t=boundary_t, kind=DAY_ROLLOVER,
                                           payload={"day": day_iso}))
            user_id = self.store.append_message(t=now, role=ROLE_USER, text=text)
            trig = TriggerEvent(trigger_id=f"trg-msg-{user_id}", t=now,
                                kind=USER_MESSAGE, context={"text": text})
            self.store.append_trigger(trig.to_record())
            self.trigger_log.append(trig)
            response_type, route, celebratory = select_response_type(
                trig, self.config.checkin_lexicon)
            summary = self.focus.summarize(self.config.thresholds.summary_window_seconds,
                                           now=now)
            retrieved = self._safe_query(text)
            history = [(m.role, m.text) for m in reversed(
                self.store.list_messages(limit=self.config.composer.history_limit + 1))
                if m.id != user_id]
            bundle = self.composer.compose_as(trig, response_type, route, celebratory,
                                              summary, retrieved, history,
                                              current_app=self.focus.current_app)
            prompt = self.composer.render(bundle)

        # the LLM call runs outside the lock so status and stream endpoints
        # stay responsive while a slow provider thinks
        result = self.gateway.generate(GenerationRequest(
            rendered_prompt=prompt,
            max_output_chars=self.config.composer.max_output_chars,
            temperature=self.config.composer.chat_temperature,
        ))

        with self._lock:
            reply_t = max(self.now(), now)
            self._advance_virtual(reply_t)
            reply_id = self.store.append_message(t=reply_t, role=ROLE_ASSISTANT,
                                                 text=result.text,
                                                 response_type=response_type,
                                                 linked_trigger_id=trig.trigger_id)
            if self.config.capabilities.rag:
                for msg_id, msg_text, msg_t in ((user_id, text, now),
                                                (reply_id, result.text, reply_t)):
                    try:
                        self.rag.index_chat_message(msg_id, msg_text, msg_t)
                    except EmbedFailed as e:
                        logger.warning("chat indexing queued for retry: %s", e.message)
            self._apply_game(GameEvent(t=now, kind=CHAT_CHECKIN, payload={"message_id": user_id}))
            reply = self.store.messages[-1]
        return user_id, reply

    # --- queries ----------------------------------------------------------------------

    def status_view(self) -> dict:
        with self._lock:
            now = self.now()
            st = self.focus.state(now)
            return {
                "mode": st.mode,
                "current_app": st.current_app,
                "idle_seconds": max(0.0, now - st.last_input_t),
                "session": self.focus.open_session_info(),
            }

    def capabilities_view(self) -> dict:
        caps = self.config.capabilities
        return {"monitoring": caps.monitoring, "chat": caps.chat, "dev_aware": caps.dev_aware,
                "rag": caps.rag, "gamified": caps.gamified}

    def gamification_view(self) -> dict:
        with self._lock:
            return self.gamification.state().to_view()

    def settings_get(self) -> dict:
        return settings_view(self.config)

    def settings_put(self, patch: dict) -> dict:
        with self._lock:
            new_config = apply_settings(self.config, patch)
            self.config = new_config
            self.focus.thresholds = new_config.thresholds
            self.notifier.set_policy(new_config.policy)
            self.rag.params = new_config.rag
            self.composer.lexicon = list(new_config.checkin_lexicon)
            self.store.put_setting("live_settings", settings_view(new_config))
            return settings_view(new_config)

    def add_document(self, title: str, text: str, doc_id: str | None = None) -> dict:
        if doc_id is None:
            doc_id = "doc:" + "-".join(title.lower().split())[:64]
        doc = Document(doc_id=doc_id, source=SOURCE_REFERENCE, title=title, text=text,
                       added_at=self.now())
        result = self.rag.index_document(doc)
        self.write_index_manifest()
        return result

    def write_index_manifest(self) -> Path:
        manifest = self.data_dir / "index.manifest"
        manifest.write_text("\n".join(self.rag.manifest_lines()) + "\n", encoding="utf-8")
        return manifest

    # --- replay -----------------------------------------------------------------------

    def replay_trace(self, trace: Trace, speed: float | str = "instant") -> ReplaySummary:
        before_triggers = len(self.trigger_log)
        before_delivered = sum(1 for e in self.notifier.journal if e["result"] == DELIVERED)
        report = replay(trace, self.handle_event, speed=speed)
        delivered = sum(1 for e in self.notifier.journal if e["result"] == DELIVERED)
        return ReplaySummary(
            events_emitted=report.events_emitted,
            virtual_duration=report.virtual_duration,
            triggers=len(self.trigger_log) - before_triggers,
            nudges_delivered=delivered - before_delivered,
        )

    # --- notification stream ------------------------------------------------------------

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _broadcast(self, note_record: dict) -> None:
        for q in list(self._subscribers):
            q.put(note_record)

    # --- auth / lifecycle ------------------------------------------------------------

    def ensure_token(self) -> str:
        token_path = self.data_dir / "token"
        if token_path.exists():
            return token_path.read_text(encoding="utf-8").strip()
        token = secrets.token_hex(16)
        token_path.write_text(token + "\n", encoding="utf-8")
        token_path.chmod(0o600)
        return token

    def close(self) -> None:
        with self._lock:
            for q in self._subscribers:
                q.put(None)  # wake streams so they can close
            self.store.close()
