import random
from pathlib import Path

import pytest

from tether.config import TetherConfig
from tether.pipeline import TetherApp

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

APP_POOL = ["code", "intellij", "gnome-terminal", "alacritty", "firefox",
            "slack", "zoom", "foo123", "widgets", "thunderbird-mail"]


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def config() -> TetherConfig:
    return TetherConfig()


@pytest.fixture
def app(tmp_path, config) -> TetherApp:
    instance = TetherApp(config, data_dir=tmp_path / "data")
    yield instance
    instance.close()


def make_app(tmp_path, config=None, **kwargs) -> TetherApp:
    return TetherApp(config or TetherConfig(), data_dir=tmp_path, **kwargs)


def random_trace_events(rng: random.Random, max_duration: float = 7200.0) -> list[dict]:
    """Synthetic but invariant-respecting event stream: input bursts, focus
    changes (sometimes rapid bursts of them), and alternating idle markers."""
    events: list[dict] = []
    t = 0.0
    idle_open = False
    while True:
        t += rng.choice([rng.uniform(1, 30), rng.uniform(30, 240), rng.uniform(240, 900)])
        t = round(t, 3)
        if t >= max_duration:
            break
        roll = rng.random()
        if roll < 0.40:
            if idle_open:
                events.append({"t": t, "kind": "IDLE_END"})
                idle_open = False
            else:
                events.append({"t": t, "kind": "INPUT_BURST",
                               "keys": rng.randint(0, 60), "clicks": rng.randint(0, 10)})
        elif roll < 0.55 and not idle_open:
            events.append({"t": t, "kind": "IDLE_START"})
            idle_open = True
        elif roll < 0.85:
            events.append({"t": t, "kind": "WINDOW_FOCUS",
                           "app_id": rng.choice(APP_POOL),
                           "window_title": f"win-{rng.randint(0, 99)}"})
        else:
            # rapid switching burst, the thrash case
            for _ in range(rng.randint(3, 9)):
                t = round(t + rng.uniform(0.5, 20.0), 3)
                if t >= max_duration:
                    break
                events.append({"t": t, "kind": "WINDOW_FOCUS",
                               "app_id": rng.choice(APP_POOL),
                               "window_title": f"win-{rng.randint(0, 99)}"})
    return events


def write_trace(path: Path, events: list[dict], bucket_seconds: float = 10.0) -> Path:
    import json

    lines = [json.dumps({"version": 1, "bucket_seconds": bucket_seconds,
                         "created_at": "2026-01-01T00:00:00Z"}, sort_keys=True)]
    lines += [json.dumps(e, sort_keys=True) for e in events]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
