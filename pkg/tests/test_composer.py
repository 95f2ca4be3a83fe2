import hashlib
import random

import pytest

from tether.composer import (
    CHAT_REPLY,
    EMOTIONAL_CHECKIN,
    NUDGE,
    ROUTE_CHAT,
    ROUTE_NOTIFICATION,
    SECTION_ORDER,
    TASK_SUGGESTION,
    Composer,
    select_response_type,
)
from tether.config import DEFAULT_CHECKIN_LEXICON
from tether.errors import BudgetImpossible
from tether.focus import ActivitySummary, TriggerEvent
from tether.rag import DocumentChunk, ScoredChunk


def trig(kind, t=300.0, **context) -> TriggerEvent:
    return TriggerEvent(trigger_id="trg-t", t=t, kind=kind, context=context)


def scored(doc_id, chunk_index, score, text="chunk text") -> ScoredChunk:
    return ScoredChunk(chunk=DocumentChunk(doc_id=doc_id, chunk_index=chunk_index,
                                           start=0, end=len(text), text=text,
                                           embedding=(1.0,)), score=score)


def summary(**overrides) -> ActivitySummary:
    base = dict(window_seconds=900.0, per_app_seconds={"code": 500.0},
                per_category_seconds={"IDE": 500.0}, idle_seconds=100.0,
                switch_count=2, last_nudge_t=None)
    base.update(overrides)
    return ActivitySummary(**base)


# --- response type selection -----------------------------------------------------

def test_prolonged_idle_maps_to_nudge_notification():
    assert select_response_type(trig("PROLONGED_IDLE", idle_seconds=300.0),
                                DEFAULT_CHECKIN_LEXICON) == (NUDGE, ROUTE_NOTIFICATION, False)


def test_thrash_maps_to_task_suggestion():
    got = select_response_type(trig("CONTEXT_THRASH", switch_count=7),
                               DEFAULT_CHECKIN_LEXICON)
    assert got == (TASK_SUGGESTION, ROUTE_NOTIFICATION, False)


def test_recovery_is_celebratory_nudge():
    got = select_response_type(trig("RECOVERY", recovered_within=60.0),
                               DEFAULT_CHECKIN_LEXICON)
    assert got == (NUDGE, ROUTE_NOTIFICATION, True)


def test_plain_message_is_chat_reply():
    got = select_response_type(trig("USER_MESSAGE", text="split this ticket into steps"),
                               DEFAULT_CHECKIN_LEXICON)
    assert got == (CHAT_REPLY, ROUTE_CHAT, False)


def test_distress_message_becomes_checkin():
    got = select_response_type(trig("USER_MESSAGE", text="I'm overwhelmed and stuck"),
                               DEFAULT_CHECKIN_LEXICON)
    assert got == (EMOTIONAL_CHECKIN, ROUTE_CHAT, False)


def test_lexicon_match_is_case_insensitive_substring():
    got = select_response_type(trig("USER_MESSAGE", text="FEELING OVERWHELMED TODAY"),
                               DEFAULT_CHECKIN_LEXICON)
    assert got == (EMOTIONAL_CHECKIN, ROUTE_CHAT, False)


# --- compose -----------------------------------------------------------------------

def test_compose_empty_context_has_six_sections():
    composer = Composer()
    bundle = composer.compose(trig("PROLONGED_IDLE", idle_seconds=300.0), None, [], [])
    assert [k for k, _ in bundle.sections] == list(SECTION_ORDER)
    assert bundle.section("RETRIEVED") == "none"
    assert bundle.section("HISTORY") == "none"
    assert bundle.section("ACTIVITY") == "none"
    assert "idle for 5 minutes" in bundle.section("INPUT")


def test_compose_is_deterministic():
    composer = Composer()
    args = (trig("USER_MESSAGE", text="help me plan"), summary(),
            [scored("d1", 0, 0.9), scored("d2", 1, 0.5)], [("USER", "earlier message")])
    r1 = composer.render(composer.compose(*args))
    r2 = composer.render(composer.compose(*args))
    assert hashlib.sha256(r1.encode()).hexdigest() == hashlib.sha256(r2.encode()).hexdigest()


def test_compose_lists_retrieved_in_score_order():
    composer = Composer()
    bundle = composer.compose(trig("USER_MESSAGE", text="x"), None,
                              [scored("beta", 0, 0.8), scored("alpha", 2, 0.6)], [])
    section = bundle.section("RETRIEVED")
    assert section.index("[beta#0]") < section.index("[alpha#2]")
    assert "(score=0.800)" in section


def test_compose_caps_history_newest_last():
    composer = Composer(history_limit=3)
    history = [("USER", f"msg {i}") for i in range(10)]
    bundle = composer.compose(trig("USER_MESSAGE", text="x"), None, [], history)
    lines = bundle.section("HISTORY").splitlines()
    assert lines == ["USER: msg 7", "USER: msg 8", "USER: msg 9"]


def test_user_message_is_verbatim_input():
    composer = Composer()
    text = "  exact   text *with* weird   spacing "
    bundle = composer.compose(trig("USER_MESSAGE", text=text), None, [], [])
    assert bundle.section("INPUT") == text


# --- render ---------------------------------------------------------------------------

def test_render_contains_headers_in_order():
    composer = Composer()
    out = composer.render(composer.compose(trig("PROLONGED_IDLE", idle_seconds=300.0),
                                           None, [], []))
    positions = [out.index(f"## {kind}") for kind in SECTION_ORDER]
    assert positions == sorted(positions)
    assert "template: nudge" in out


def test_render_truncates_history_oldest_first():
    composer = Composer(prompt_char_budget=2600, history_limit=12)
    history = [("USER", f"filler message number {i} " + "x" * 120) for i in range(12)]
    bundle = composer.compose(trig("USER_MESSAGE", text="keep this input"), None, [], history)
    out = composer.render(bundle)
    assert len(out) <= 2600
    assert "keep this input" in out
    assert "## PRINCIPLES" in out
    kept = [i for i in range(12) if f"filler message number {i} " in out]
    assert kept == list(range(12 - len(kept), 12))  # newest survive


def test_render_drops_retrieved_lowest_score_first():
    composer = Composer(prompt_char_budget=2400)
    retrieved = [scored("high", 0, 0.9, text="h" * 300),
                 scored("mid", 0, 0.5, text="m" * 300),
                 scored("low", 0, 0.2, text="l" * 300)]
    bundle = composer.compose(trig("USER_MESSAGE", text="q"), None, retrieved, [])
    out = composer.render(bundle)
    if "[low#0]" in out:
        assert "[mid#0]" in out and "[high#0]" in out
    if "[mid#0]" in out:
        assert "[high#0]" in out


def test_render_budget_impossible():
    composer = Composer(prompt_char_budget=200)
    bundle = composer.compose(trig("USER_MESSAGE", text="y" * 500), None, [], [])
    with pytest.raises(BudgetImpossible):
        composer.render(bundle)


def test_render_never_drops_principles_or_input_random_inputs():
    rng = random.Random(23)
    kinds = ["PROLONGED_IDLE", "CONTEXT_THRASH", "RECOVERY", "USER_MESSAGE"]
    for i in range(100):
        budget = rng.choice([1500, 2500, 4000, 12000])
        composer = Composer(prompt_char_budget=budget)
        kind = rng.choice(kinds)
        context = {"idle_seconds": rng.uniform(300, 2000),
                   "switch_count": rng.randint(6, 20),
                   "recovered_within": rng.uniform(0, 120),
                   "apps_involved": ["code"],
                   "text": "input " + "w" * rng.randint(0, 300)}
        retrieved = [scored(f"d{j}", 0, rng.random(), text="r" * rng.randint(10, 400))
                     for j in range(rng.randint(0, 4))]
        retrieved.sort(key=lambda s: -s.score)
        history = [("USER", "h" * rng.randint(5, 200)) for _ in range(rng.randint(0, 12))]
        bundle = composer.compose(trig(kind, **context), summary(), retrieved, history)
        try:
            out = composer.render(bundle)
        except BudgetImpossible:
            continue
        assert len(out) <= budget, f"case {i}"
        order = [out.index(f"## {k}") for k in SECTION_ORDER]
        assert order == sorted(order)
        assert bundle.section("INPUT") in out
        for principle in composer.pack.principle_texts:
            assert principle in out
        assert composer.render(bundle) == out  # deterministic


def test_missing_template_raises(tmp_path):
    assets = tmp_path / "assets"
    (assets / "templates").mkdir(parents=True)
    (assets / "principles.txt").write_text("id: custom\n- only rule\n")
    composer = Composer(assets_dir=assets)
    with pytest.raises(Exception) as exc:
        composer.compose(trig("PROLONGED_IDLE", idle_seconds=10.0), None, [], [])
    assert getattr(exc.value, "code", "") == "TEMPLATE_MISSING"
