"""Loopback HTTP API: the only surface the companion UI and CLI talk to.

Bound to 127.0.0.1 only; every /v1/* request must carry the local token
(Authorization: Bearer or ?token=, the query form exists for EventSource
clients that cannot set headers). Static UI files are served from ui_dir at
/ without the token, since they contain no data.

Error bodies are always {"error": {"code", "message"}} with stable codes.
"""

from __future__ import annotations

import json
import logging
import queue
import secrets
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import BadParams, ConfigError, EmbedFailed, GatewayTimeout, ProviderError, TetherError
from .notify import DELIVERED
from .pipeline import TetherApp

logger = logging.getLogger(__name__)

STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".json": "application/json",
    ".map": "application/json",
}

HEARTBEAT_SECONDS = 2.0


class ApiServer:
    def __init__(self, app: TetherApp, port: int | None = None, ui_dir: str | Path | None = None):
        self.app = app
        self.token = app.ensure_token()
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.shutting_down = threading.Event()
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer(
            ("127.0.0.1", app.config.port if port is None else port), handler)
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        kwargs={"poll_interval": 0.1}, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.shutting_down.set()
        self.app.close()  # wakes stream subscribers
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def _make_handler(server: ApiServer):
    app = server.app

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "tether"

        def log_message(self, fmt, *args):
            logger.debug("http: " + fmt, *args)

        # --- plumbing -----------------------------------------------------

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error(self, status: int, code: str, message: str) -> None:
            self._send_json(status, {"error": {"code": code, "message": message}})

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length <= 0:
                return {}
            raw = self.rfile.read(length)
            try:
                parsed = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise BadParams("body must be a JSON object")
            if not isinstance(parsed, dict):
                raise BadParams("body must be a JSON object")
            return parsed

        def _authorized(self, query: dict) -> bool:
            header = self.headers.get("Authorization", "")
            if header.startswith("Bearer ") and secrets.compare_digest(
                    header[7:].strip(), server.token):
                return True
            return secrets.compare_digest(query.get("token", [""])[0], server.token)

        # --- routing ----------------------------------------------------------

        def do_GET(self):
            url = urlparse(self.path)
            query = parse_qs(url.query)
            if not url.path.startswith("/v1/"):
                return self._serve_static(url.path)
            if not self._authorized(query):
                return self._send_error(401, "UNAUTHORIZED", "missing or bad token")
            try:
                if url.path == "/v1/status":
                    return self._send_json(200, app.status_view())
                if url.path == "/v1/capabilities":
                    return self._send_json(200, app.capabilities_view())
                if url.path == "/v1/gamification":
                    return self._send_json(200, app.gamification_view())
                if url.path == "/v1/settings":
                    return self._send_json(200, app.settings_get())
                if url.path == "/v1/notifications":
                    since = _number(query, "since", -1.0)
                    notes = [n.to_record() for n in app.notifier.feed(since)]
                    return self._send_json(200, {"notifications": notes})
                if url.path == "/v1/chat/messages":
                    return self._get_messages(query)
                if url.path == "/v1/notifications/stream":
                    return self._stream(query)
                return self._send_error(404, "NOT_FOUND", f"no route {url.path}")
            except (BrokenPipeError, ConnectionResetError):
                pass
            except BadParams as e:
                return self._send_error(422, e.code, e.message)
            except TetherError as e:
                return self._send_error(500, e.code, e.message)
            except Exception as e:  # never leave a request without a response
                logger.exception("unhandled error on %s", url.path)
                return self._send_error(500, "INTERNAL", str(e))

        def do_POST(self):
            url = urlparse(self.path)
            query = parse_qs(url.query)
            if not self._authorized(query):
                return self._send_error(401, "UNAUTHORIZED", "missing or bad token")
            try:
                body = self._read_body()
                if url.path == "/v1/chat/messages":
                    return self._post_chat(body)
                if url.path == "/v1/documents":
                    return self._post_document(body)
                return self._send_error(404, "NOT_FOUND", f"no route {url.path}")
            except BadParams as e:
                return self._send_error(422, e.code, e.message)
            except TetherError as e:
                return self._send_error(500, e.code, e.message)
            except Exception as e:
                logger.exception("unhandled error on %s", url.path)
                return self._send_error(500, "INTERNAL", str(e))

        def do_PUT(self):
            url = urlparse(self.path)
            query = parse_qs(url.query)
            if not self._authorized(query):
                return self._send_error(401, "UNAUTHORIZED", "missing or bad token")
            try:
                body = self._read_body()
                if url.path == "/v1/settings":
                    return self._send_json(200, app.settings_put(body))
                return self._send_error(404, "NOT_FOUND", f"no route {url.path}")
            except (BadParams, ConfigError) as e:
                return self._send_error(422, e.code, e.message)
            except TetherError as e:
                return self._send_error(500, e.code, e.message)
            except Exception as e:
                logger.exception("unhandled error on %s", url.path)
                return self._send_error(500, "INTERNAL", str(e))

        # --- handlers ------------------------------------------------------------

        def _post_chat(self, body: dict) -> None:
            if not app.config.capabilities.chat:
                return self._send_error(404, "CHAT_DISABLED", "chat is disabled in config")
            text = body.get("text")
            if not isinstance(text, str) or not (1 <= len(text) <= 4000):
                return self._send_error(422, "BAD_TEXT", "text must be 1..4000 chars")
            try:
                user_id, reply = app.post_chat(text)
            except (GatewayTimeout, ProviderError) as e:
                return self._send_error(
                    503, "LLM_UNAVAILABLE",
                    f"provider unavailable ({e.code}); your message was saved")
            return self._send_json(200, {"user_message_id": user_id,
                                         "reply": reply.to_record()})

        def _get_messages(self, query: dict) -> None:
            limit = int(_number(query, "limit", 50))
            before_raw = query.get("before_id", [None])[0]
            try:
                before_id = int(before_raw) if before_raw else None
            except ValueError:
                raise BadParams("before_id must be an integer")
            msgs = app.store.list_messages(limit=max(1, min(limit, 500)), before_id=before_id)
            return self._send_json(200, {"messages": [m.to_record() for m in msgs]})

        def _post_document(self, body: dict) -> None:
            title, text = body.get("title"), body.get("text")
            if not isinstance(title, str) or not title.strip():
                return self._send_error(422, "BAD_DOCUMENT", "title must be non-empty")
            if not isinstance(text, str) or not text:
                return self._send_error(422, "BAD_DOCUMENT", "text must be non-empty")
            try:
                result = app.add_document(title.strip(), text)
            except EmbedFailed as e:
                return self._send_error(503, e.code, e.message)
            return self._send_json(200, result)

        def _stream(self, query: dict) -> None:
            last_id = self.headers.get("Last-Event-ID")
            try:
                since_id = int(query.get("since", [last_id or "0"])[0] or 0)
            except ValueError:
                raise BadParams("since must be an integer id")
            sub = app.subscribe()
            try:
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Cache-Control", "no-cache")
                self.send_header("Connection", "close")
                self.end_headers()
                self.wfile.write(b"retry: 2000\n\n")
                cursor = since_id
                for note in app.notifier.feed_after_id(since_id):
                    cursor = self._emit_sse(note.to_record(), cursor)
                self.wfile.flush()
                while not server.shutting_down.is_set():
                    try:
                        item = sub.get(timeout=HEARTBEAT_SECONDS)
                    except queue.Empty:
                        self.wfile.write(b": ping\n\n")
                        self.wfile.flush()
                        continue
                    if item is None:
                        break
                    cursor = self._emit_sse(item, cursor)
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                pass
            finally:
                app.unsubscribe(sub)

        def _emit_sse(self, record: dict, cursor: int) -> int:
            if record["id"] <= cursor:
                return cursor
            data = json.dumps(record)
            self.wfile.write(
                f"id: {record['id']}\nevent: notification\ndata: {data}\n\n".encode("utf-8"))
            return record["id"]

        # --- static UI ---------------------------------------------------------------

        def _serve_static(self, path: str) -> None:
            if server.ui_dir is None or not server.ui_dir.exists():
                if path in ("/", "/index.html"):
                    body = b"tether daemon is running; no UI bundle configured\n"
                    self.send_response(200)
                    self.send_header("Content-Type", "text/plain; charset=utf-8")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                    return
                return self._send_error(404, "NOT_FOUND", "no UI bundle configured")
            rel = path.lstrip("/") or "index.html"
            target = (server.ui_dir / rel).resolve()
            if not str(target).startswith(str(server.ui_dir.resolve())) or not target.is_file():
                # SPA fallback: unknown paths get the app shell
                target = server.ui_dir / "index.html"
                if not target.is_file():
                    return self._send_error(404, "NOT_FOUND", "not found")
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type",
                             STATIC_TYPES.get(target.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def _number(query: dict, key: str, default: float) -> float:
    raw = query.get(key, [None])[0]
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise BadParams(f"{key} must be a number")


def delivered_count(app: TetherApp) -> int:
    return sum(1 for e in app.notifier.journal if e["result"] == DELIVERED)
