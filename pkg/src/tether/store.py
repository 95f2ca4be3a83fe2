"""Single-file durable store: an append-only journal of checksummed records,
folded into memory on open.

Frame layout per record: magic "TJ", u32 payload length, u32 crc32, then the
JSON payload. Appends are one write() of the whole frame followed by fsync,
so an append is acknowledged only once it is durable, and a crash between
appends leaves the file at a clean record boundary. Any torn or checksum-bad
tail is treated as corruption: the store refuses to open, copies the damaged
file to a backup path, and reports that path, rather than silently reading
past it.

Record kinds: manifest (first record), msg, event, trigger, note, game, doc,
setting. Documents supersede earlier records with the same doc_id; settings
supersede per key. There is no compaction yet.

TODO(compaction): rewrite the journal dropping superseded doc/setting records
and events older than the retention window.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import struct
import threading
import zlib
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path

from .errors import CorruptionError, StoreFull, StoreIOError

logger = logging.getLogger(__name__)

MAGIC = b"TJ"
HEADER = struct.Struct("<2sII")
SCHEMA_VERSION = 1

ROLE_USER = "USER"
ROLE_ASSISTANT = "ASSISTANT"
ROLE_SYSTEM = "SYSTEM"


@dataclass(frozen=True)
class ChatMessage:
    id: int
    t: float
    role: str
    text: str
    response_type: str | None = None
    linked_trigger_id: str | None = None

    def to_record(self) -> dict:
        rec: dict = {"id": self.id, "t": self.t, "role": self.role, "text": self.text}
        if self.response_type is not None:
            rec["response_type"] = self.response_type
        if self.linked_trigger_id is not None:
            rec["linked_trigger_id"] = self.linked_trigger_id
        return rec

    @staticmethod
    def from_record(rec: dict) -> "ChatMessage":
        return ChatMessage(id=rec["id"], t=rec["t"], role=rec["role"], text=rec["text"],
                           response_type=rec.get("response_type"),
                           linked_trigger_id=rec.get("linked_trigger_id"))


class Store:
    def __init__(self, path: str | Path, read_only: bool = False,
                 epoch_date: str | None = None, epoch_offset: float = 0.0,
                 retention_days: int = 30):
        self.path = Path(path)
        self.read_only = read_only
        self.retention_days = retention_days
        self._lock = threading.Lock()
        self._fh = None
        self.write_gate = None  # test hook: callable(write_ordinal) before each write
        self._write_ordinal = 0

        self.manifest: dict = {}
        self.messages: list[ChatMessage] = []
        self.events: list[dict] = []
        self.triggers: list[dict] = []
        self.notifications: list[dict] = []
        self.game_events: list[dict] = []
        self.docs: dict[str, dict] = {}
        self.settings: dict = {}

        fresh = not self.path.exists()
        if fresh and read_only:
            raise StoreIOError(f"store {self.path} does not exist")
        if fresh:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.manifest = {
                "r": "manifest",
                "schema_version": SCHEMA_VERSION,
                "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "epoch_date": epoch_date or date(2026, 1, 1).isoformat(),
                "epoch_offset": epoch_offset,
            }
            self._fh = self._open_handle()
            self._append(self.manifest)
        else:
            self._fold()
            if not read_only:
                self._fh = self._open_handle()

    def _open_handle(self):
        try:
            return open(self.path, "ab")
        except OSError as e:
            raise StoreIOError(f"cannot open store {self.path}: {e}")

    # --- journal framing ------------------------------------------------------

    def _append(self, payload: dict) -> None:
        if self.read_only:
            raise StoreIOError("store opened read-only")
        data = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
        frame = HEADER.pack(MAGIC, len(data), zlib.crc32(data)) + data
        with self._lock:
            if self.write_gate is not None:
                self.write_gate(self._write_ordinal)
            self._write_ordinal += 1
            try:
                self._fh.write(frame)
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as e:
                if e.errno == 28:  # ENOSPC
                    raise StoreFull(f"no space left appending to {self.path}")
                raise StoreIOError(f"append failed: {e}")

    def _scan(self):
        raw = self.path.read_bytes()
        offset = 0
        while offset < len(raw):
            if offset + HEADER.size > len(raw):
                self._corrupt(f"torn record header at byte {offset}")
            magic, length, crc = HEADER.unpack_from(raw, offset)
            if magic != MAGIC:
                self._corrupt(f"bad magic at byte {offset}")
            start = offset + HEADER.size
            end = start + length
            if end > len(raw):
                self._corrupt(f"torn record payload at byte {offset}")
            payload = raw[start:end]
            if zlib.crc32(payload) != crc:
                self._corrupt(f"checksum mismatch at byte {offset}")
            try:
                yield json.loads(payload.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                self._corrupt(f"unreadable payload at byte {offset}")
            offset = end

    def _corrupt(self, why: str):
        backup = self._backup_path()
        try:
            shutil.copyfile(self.path, backup)
        except OSError:
            backup = None
        message = f"store {self.path} is corrupt ({why}); refusing to open"
        if backup is not None:
            message += f"; damaged file copied to {backup}"
        raise CorruptionError(message, backup_path=str(backup) if backup else None)

    def _backup_path(self) -> Path:
        n = 0
        while True:
            candidate = self.path.with_suffix(self.path.suffix + f".corrupt{n or ''}")
            if not candidate.exists():
                return candidate
            n += 1

    # --- fold -------------------------------------------------------------------

    def _fold(self) -> None:
        records = list(self._scan())
        if not records or records[0].get("r") != "manifest":
            self._corrupt("missing manifest record")
        self.manifest = records[0]
        if self.manifest.get("schema_version") != SCHEMA_VERSION:
            raise StoreIOError(
                f"unsupported schema_version {self.manifest.get('schema_version')}")
        max_event_t = 0.0
        for rec in records[1:]:
            kind = rec.get("r")
            if kind == "event":
                max_event_t = max(max_event_t, rec["event"].get("t", 0.0))
        horizon = max_event_t - self.retention_days * 86400.0
        for rec in records[1:]:
            kind = rec.get("r")
            if kind == "msg":
                self.messages.append(ChatMessage.from_record(rec["msg"]))
            elif kind == "event":
                if rec["event"].get("t", 0.0) >= horizon:
                    self.events.append(rec["event"])
            elif kind == "trigger":
                self.triggers.append(rec["trigger"])
            elif kind == "note":
                self.notifications.append(rec["note"])
            elif kind == "game":
                self.game_events.append(rec["game"])
            elif kind == "doc":
                self.docs[rec["doc"]["doc_id"]] = rec["doc"]
            elif kind == "setting":
                self.settings[rec["key"]] = rec["value"]
            else:
                logger.warning("skipping unknown record kind %r", kind)

    # --- typed appends ------------------------------------------------------------

    def append_message(self, t: float, role: str, text: str,
                       response_type: str | None = None,
                       linked_trigger_id: str | None = None) -> int:
        next_id = self.messages[-1].id + 1 if self.messages else 1
        msg = ChatMessage(id=next_id, t=t, role=role, text=text,
                          response_type=response_type, linked_trigger_id=linked_trigger_id)
        self._append({"r": "msg", "msg": msg.to_record()})
        self.messages.append(msg)
        return next_id

    def list_messages(self, limit: int, before_id: int | None = None) -> list[ChatMessage]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        rows = self.messages
        if before_id is not None:
            rows = [m for m in rows if m.id < before_id]
        return list(reversed(rows[-limit:]))

    def append_event(self, event_record: dict) -> None:
        self._append({"r": "event", "event": event_record})
        self.events.append(event_record)

    def append_trigger(self, trigger_record: dict) -> None:
        self._append({"r": "trigger", "trigger": trigger_record})
        self.triggers.append(trigger_record)

    def append_notification(self, journal_entry: dict) -> None:
        self._append({"r": "note", "note": journal_entry})
        self.notifications.append(journal_entry)

    def append_game_event(self, game_record: dict) -> None:
        self._append({"r": "game", "game": game_record})
        self.game_events.append(game_record)

    def put_document(self, doc_payload: dict) -> None:
        """One record per document, chunks embedded, so indexing is atomic."""
        self._append({"r": "doc", "doc": doc_payload})
        self.docs[doc_payload["doc_id"]] = doc_payload

    def put_setting(self, key: str, value) -> None:
        self._append({"r": "setting", "key": key, "value": value})
        self.settings[key] = value

    # --- lifecycle ------------------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def state_digest(self) -> dict:
        return {
            "messages": [m.to_record() for m in self.messages],
            "events": self.events,
            "triggers": self.triggers,
            "notifications": self.notifications,
            "game_events": self.game_events,
            "docs": self.docs,
            "settings": self.settings,
        }

    def snapshot_and_reload(self) -> dict:
        """Compare in-memory state against a fresh read of the file."""
        with self._lock:
            if self._fh is not None:
                self._fh.flush()
        other = Store(self.path, read_only=True, retention_days=self.retention_days)
        mine, theirs = self.state_digest(), other.state_digest()
        diffs = [k for k in mine if mine[k] != theirs[k]]
        return {"equal": not diffs, "diffs": diffs}

    def journal_bytes_after_manifest(self) -> bytes:
        """Raw journal minus the manifest frame; replay-equality compares this."""
        raw = self.path.read_bytes()
        _, length, _ = HEADER.unpack_from(raw, 0)
        return raw[HEADER.size + length:]
