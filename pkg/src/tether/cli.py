"""Operator entry point. Every pipeline stage is exercisable headlessly:

    tether run [--config PATH] [--headless] [--replay TRACE] [--port N]
    tether replay PATH [--instant] [--data-dir DIR]
    tether index PATH... [--data-dir DIR]
    tether query "text" [-k N] [--data-dir DIR]
    tether prompt-preview --trigger {idle,thrash,recovery} [--data-dir DIR]
    tether stats [--export] [--data-dir DIR]
    tether export --chat [--data-dir DIR]
    tether capabilities [--config PATH]

Exit codes: 0 success, 1 runtime error, 2 usage or config error.
Output is line-oriented and stable; scripts may parse it.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import tempfile
import threading
import time
from pathlib import Path

from .api import ApiServer
from .composer import describe_input, select_response_type
from .config import TetherConfig, load_config
from .errors import ConfigError, TetherError
from .focus import CONTEXT_THRASH, PROLONGED_IDLE, RECOVERY, TriggerEvent
from .monitor import LiveMonitor, X11Adapter, load_trace
from .errors import ClockSkew
from .pipeline import TetherApp

DEFAULT_CONFIG_PATH = Path("~/.tether/config").expanduser()

PREVIEW_TRIGGERS = {
    "idle": TriggerEvent(trigger_id="preview-1", t=300.0, kind=PROLONGED_IDLE,
                         context={"idle_seconds": 300.0}),
    "thrash": TriggerEvent(trigger_id="preview-2", t=120.0, kind=CONTEXT_THRASH,
                           context={"switch_count": 7, "apps_involved": ["code", "slack"]}),
    "recovery": TriggerEvent(trigger_id="preview-3", t=450.0, kind=RECOVERY,
                             context={"recovered_within": 90.0, "apps_involved": ["code"]}),
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e.message}", file=sys.stderr)
        return 2
    except TetherError as e:
        print(f"error [{e.code}]: {e.message}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tether",
                                     description="local-first focus assistant")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="start the daemon")
    run.add_argument("--config", default=None)
    run.add_argument("--data-dir", default=None)
    run.add_argument("--headless", action="store_true",
                     help="no live platform monitoring; trace replay and API only")
    run.add_argument("--port", type=int, default=None)
    run.add_argument("--ui-dir", default=None)
    run.add_argument("--replay", default=None, metavar="TRACE",
                     help="replay a trace into the live pipeline after startup")
    run.add_argument("--replay-delay", type=float, default=0.0)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="replay a trace headlessly and report")
    rep.add_argument("path")
    rep.add_argument("--instant", action="store_true")
    rep.add_argument("--speed", type=float, default=1.0)
    rep.add_argument("--config", default=None)
    rep.add_argument("--data-dir", default=None,
                     help="default is an ephemeral directory")
    rep.set_defaults(func=cmd_replay)

    idx = sub.add_parser("index", help="index reference documents")
    idx.add_argument("paths", nargs="+")
    idx.add_argument("--config", default=None)
    idx.add_argument("--data-dir", default=None)
    idx.set_defaults(func=cmd_index)

    qry = sub.add_parser("query", help="similarity-search the index")
    qry.add_argument("text")
    qry.add_argument("-k", type=int, default=None)
    qry.add_argument("--config", default=None)
    qry.add_argument("--data-dir", default=None)
    qry.set_defaults(func=cmd_query)

    prev = sub.add_parser("prompt-preview", help="render a sample prompt")
    prev.add_argument("--trigger", choices=sorted(PREVIEW_TRIGGERS), default="idle")
    prev.add_argument("--config", default=None)
    prev.add_argument("--data-dir", default=None)
    prev.set_defaults(func=cmd_prompt_preview)

    stats = sub.add_parser("stats", help="gamification state")
    stats.add_argument("--export", action="store_true",
                       help="emit the award journal as JSON lines")
    stats.add_argument("--config", default=None)
    stats.add_argument("--data-dir", default=None)
    stats.set_defaults(func=cmd_stats)

    exp = sub.add_parser("export", help="export stored records")
    exp.add_argument("--chat", action="store_true", required=True)
    exp.add_argument("--config", default=None)
    exp.add_argument("--data-dir", default=None)
    exp.set_defaults(func=cmd_export)

    caps = sub.add_parser("capabilities", help="capability flags")
    caps.add_argument("--config", default=None)
    caps.set_defaults(func=cmd_capabilities)

    return parser


def _load_config(args) -> TetherConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    if DEFAULT_CONFIG_PATH.exists():
        return load_config(DEFAULT_CONFIG_PATH)
    return TetherConfig()


def _open_app(args, ephemeral_ok: bool = False) -> TetherApp:
    config = _load_config(args)
    data_dir = getattr(args, "data_dir", None)
    if data_dir is None and ephemeral_ok:
        data_dir = tempfile.mkdtemp(prefix="tether-replay-")
    return TetherApp(config, data_dir=data_dir)


# --- commands ---------------------------------------------------------------

def cmd_run(args) -> int:
    config = _load_config(args)
    app = TetherApp(config, data_dir=args.data_dir, live_clock=True)
    server = ApiServer(app, port=args.port, ui_dir=args.ui_dir or config.ui_dir or None)
    server.start()
    print(f"listening on http://127.0.0.1:{server.port}/?token={server.token}", flush=True)

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())

    if args.replay:
        trace = load_trace(args.replay)

        def _replay():
            if args.replay_delay:
                time.sleep(args.replay_delay)
            summary = app.replay_trace(trace, speed="instant")
            print(f"replayed: triggers={summary.triggers} "
                  f"nudges_delivered={summary.nudges_delivered}", flush=True)

        threading.Thread(target=_replay, daemon=True).start()

    # live sampling and replay are mutually exclusive; replay wins when given
    monitor = None
    if not args.headless and not args.replay and config.capabilities.monitoring:
        monitor = LiveMonitor(X11Adapter(), bucket_seconds=config.bucket_seconds,
                              redact_titles=config.redact_titles)

    try:
        while not stop.is_set():
            if monitor is not None:
                try:
                    for event in monitor.capture_sample(app.now()):
                        app.handle_event(event)
                except ClockSkew:
                    pass
            stop.wait(config.poll_seconds)
    finally:
        server.stop()
        print("shut down cleanly", flush=True)
    return 0


def cmd_replay(args) -> int:
    trace = load_trace(args.path)
    app = _open_app(args, ephemeral_ok=True)
    try:
        speed = "instant" if args.instant else args.speed
        summary = app.replay_trace(trace, speed=speed)
        print(f"events={summary.events_emitted}")
        print(f"virtual_duration={summary.virtual_duration:g}")
        print(f"triggers={summary.triggers} nudges_delivered={summary.nudges_delivered}")
        return 0
    finally:
        app.close()


def cmd_index(args) -> int:
    app = _open_app(args)
    try:
        for path in args.paths:
            p = Path(path)
            text = p.read_text(encoding="utf-8")
            title = p.stem.replace("_", " ").replace("-", " ")
            result = app.add_document(title, text, doc_id=p.stem)
            print(f"indexed\t{p.stem}\t{result['chunks_indexed']}")
        return 0
    finally:
        app.close()


def cmd_query(args) -> int:
    app = _open_app(args)
    try:
        for scored in app.rag.query(args.text, k=args.k):
            print(f"{scored.score:.4f}\t{scored.chunk.doc_id}\t{scored.chunk.chunk_index}")
        return 0
    finally:
        app.close()


def cmd_prompt_preview(args) -> int:
    app = _open_app(args, ephemeral_ok=True)
    try:
        trig = PREVIEW_TRIGGERS[args.trigger]
        response_type, route, celebratory = select_response_type(
            trig, app.config.checkin_lexicon)
        summary = app.focus.summarize(app.config.thresholds.summary_window_seconds,
                                      now=trig.t)
        retrieved = app.rag.query(describe_input(trig, None)) if app.rag.doc_count() else []
        bundle = app.composer.compose_as(trig, response_type, route, celebratory,
                                         summary, retrieved, [], current_app=None)
        print(app.composer.render(bundle))
        return 0
    finally:
        app.close()


def cmd_stats(args) -> int:
    app = _open_app(args)
    try:
        state = app.gamification.state()
        if args.export:
            for award in state.journal:
                print(json.dumps(award.to_record(), sort_keys=True))
            return 0
        print(f"points={state.points}")
        print(f"badges={','.join(sorted(state.badges))}")
        print(f"streak_days={state.streak_days}")
        print(f"themes={','.join(sorted(state.unlocked_themes))}")
        return 0
    finally:
        app.close()


def cmd_export(args) -> int:
    app = _open_app(args)
    try:
        for msg in app.store.messages:
            print(json.dumps(msg.to_record(), sort_keys=True))
        return 0
    finally:
        app.close()


def cmd_capabilities(args) -> int:
    config = _load_config(args)
    caps = config.capabilities
    print(f"monitoring={'true' if caps.monitoring else 'false'}")
    print(f"chat={'true' if caps.chat else 'false'}")
    print(f"dev_aware={'true' if caps.dev_aware else 'false'}")
    print(f"rag={'true' if caps.rag else 'false'}")
    print(f"gamified={'true' if caps.gamified else 'false'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
