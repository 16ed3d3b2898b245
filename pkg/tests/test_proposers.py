from __future__ import annotations

import json

import httpx
import pytest

from loopinv.houdini import HoudiniProposer, build_atom_pool, houdini_synthesize
from loopinv.interp import explore
from loopinv.parser import parse_program
from loopinv.proposers import (
    REPAIR_INSTRUCTION, ExtractionError, Feedback, HistoryEntry, LlmProposer,
    Proposal, ProposalContext, ProposerError, ScriptedProposer, build_prompt,
    extract_invariant, make_proposer, render_counterexample,
)
from loopinv.smt import VerdictKind
from loopinv.vcgen import make_template

from conftest import load_corpus_source

COUNT_UP = "int x; x = 0; while (x < 5) { x = x + 1; } assert(x == 5);"


def ctx(attempt: int = 1, feedback: Feedback | None = None,
        history: tuple[HistoryEntry, ...] = ()) -> ProposalContext:
    return ProposalContext(
        source_text=COUNT_UP,
        cfg_json="{}",
        template_texts=("a", "b", "c"),
        history=history,
        feedback=feedback,
        attempt_index=attempt,
    )


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def test_extract_from_fenced_block():
    raw = "The invariant is:\n```\n(= sn (- i 1))\n```"
    assert extract_invariant(raw).smt_text == "(= sn (- i 1))"


def test_extract_identity_on_bare_term():
    raw = "(and (>= i 1) (= sn (- i 1)))"
    inv = extract_invariant(raw)
    assert inv.smt_text == raw
    assert inv.balanced


def test_extract_unbalanced_passes_through_flagged():
    raw = "I think (= x (+ y)"
    inv = extract_invariant(raw)
    assert inv.smt_text == raw
    assert not inv.balanced


def test_extract_last_balanced_wins():
    raw = "first guess (= x 0) but actually (and (>= x 0) (<= x 5)) is better"
    assert extract_invariant(raw).smt_text == "(and (>= x 0) (<= x 5))"


def test_extract_bare_atom():
    assert extract_invariant("  true\n").smt_text == "true"


def test_extract_fenced_with_language_tag():
    raw = "```smt2\n(<= x 5)\n```\ntrailing prose"
    assert extract_invariant(raw).smt_text == "(<= x 5)"


def test_extract_empty_raises():
    with pytest.raises(ExtractionError):
        extract_invariant("   \n")
    with pytest.raises(ExtractionError):
        extract_invariant("no term here at all")


# ---------------------------------------------------------------------------
# context and prompts
# ---------------------------------------------------------------------------

def test_context_validates_feedback_shape():
    with pytest.raises(ValueError):
        ProposalContext("s", "c", ("a", "b", "c"), (), None, attempt_index=2)
    with pytest.raises(ValueError):
        ProposalContext("s", "c", ("a", "b", "c"), (),
                        Feedback("counterexample", "initialization", "x = 1"), attempt_index=1)
    with pytest.raises(ValueError):
        ProposalContext("s", "c", ("a", "b", "c"), (HistoryEntry("t", "n"),), None, 1)


def test_init_prompt_has_no_feedback_sections():
    prompt = build_prompt(ctx())
    assert "[PROGRAM]" in prompt and "[SMT TEMPLATES]" in prompt
    assert "[SOLVER FEEDBACK]" not in prompt
    assert REPAIR_INSTRUCTION not in prompt


def test_repair_prompt_contains_history_feedback_and_instruction():
    fb = Feedback("counterexample", "postcondition", "i = 0\nsize = -2\nsn = -1")
    history = (HistoryEntry("(= sn (- i 1))", "counterexample on the postcondition check"),)
    prompt = build_prompt(ctx(attempt=2, feedback=fb, history=history))
    assert "(= sn (- i 1))" in prompt
    assert fb.text in prompt  # verbatim
    assert REPAIR_INSTRUCTION in prompt


def test_render_counterexample_orders_program_vars_first():
    text = render_counterexample({"size": -2, "i": 0, "sn": -1, "aux!1": 7},
                                 variable_order=("sn", "i", "size"))
    assert text.splitlines() == ["sn = -1", "i = 0", "size = -2", "aux!1 = 7"]


# ---------------------------------------------------------------------------
# scripted proposer
# ---------------------------------------------------------------------------

def test_scripted_replays_in_order():
    sp = ScriptedProposer(["(= x 0)", "(<= x 5)"])
    assert sp.propose(ctx(1)).candidate.smt_text == "(= x 0)"
    fb = Feedback("counterexample", "initialization", "x = 1")
    second = sp.propose(ctx(2, fb, (HistoryEntry("(= x 0)", "n"),)))
    assert second.candidate.smt_text == "(<= x 5)"


def test_scripted_repeats_last_when_exhausted():
    sp = ScriptedProposer(["(= x 0)"])
    fb = Feedback("counterexample", "initialization", "x = 1")
    third = sp.propose(ctx(3, fb, (HistoryEntry("a", "n"), HistoryEntry("b", "n"))))
    assert third.candidate.smt_text == "(= x 0)"


def test_scripted_deterministic():
    sp = ScriptedProposer(["(= x 0)"])
    a = sp.propose(ctx(1))
    b = sp.propose(ctx(1))
    assert a.candidate == b.candidate and a.prompt == b.prompt


def test_scripted_from_file(tmp_path):
    path = tmp_path / "cands.json"
    path.write_text(json.dumps(["true", "(= x 0)"]))
    sp = ScriptedProposer.from_file(path)
    assert sp.propose(ctx(1)).candidate.smt_text == "true"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"not": "a list"}))
    with pytest.raises(ValueError):
        ScriptedProposer.from_file(bad)


# ---------------------------------------------------------------------------
# llm proposer (mock transport; no network)
# ---------------------------------------------------------------------------

def _mock_client(handler) -> httpx.Client:
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_llm_sends_temperature_zero_and_bearer(monkeypatch):
    monkeypatch.setenv("LOOPINV_API_KEY", "sk-test")
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("Authorization")
        seen["url"] = str(request.url)
        return httpx.Response(200, json={
            "choices": [{"message": {"content": "(<= x 5)"}}]
        })

    prop = LlmProposer("http://mock.local/v1", model="test-model", client=_mock_client(handler))
    proposal = prop.propose(ctx())
    assert proposal.candidate.smt_text == "(<= x 5)"
    assert seen["body"]["temperature"] == 0
    assert seen["body"]["model"] == "test-model"
    assert seen["body"]["messages"][0]["role"] == "user"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["url"].endswith("/chat/completions")


def test_llm_repair_call_includes_instruction():
    prompts = []

    def handler(request: httpx.Request) -> httpx.Response:
        prompts.append(json.loads(request.content)["messages"][0]["content"])
        return httpx.Response(200, json={"choices": [{"message": {"content": "true"}}]})

    prop = LlmProposer("http://mock.local", model="m", client=_mock_client(handler))
    fb = Feedback("parse-error", "initialization", '(error "line 3: oops")')
    prop.propose(ctx(2, fb, (HistoryEntry("(bad", "parse-error on the initialization check"),)))
    assert REPAIR_INSTRUCTION in prompts[0]
    assert '(error "line 3: oops")' in prompts[0]


def test_llm_retries_then_raises():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        return httpx.Response(500, text="boom")

    prop = LlmProposer("http://mock.local", model="m", client=_mock_client(handler))
    with pytest.raises(ProposerError):
        prop.propose(ctx())
    assert calls["n"] == 3  # first try + 2 transport retries


def test_llm_recovers_after_transient_failure():
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        if calls["n"] == 1:
            return httpx.Response(503, text="warming up")
        return httpx.Response(200, json={"choices": [{"message": {"content": "(= x 0)"}}]})

    prop = LlmProposer("http://mock.local", model="m", client=_mock_client(handler))
    assert prop.propose(ctx()).candidate.smt_text == "(= x 0)"


def test_make_proposer_registry(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('["true"]')
    sp = make_proposer(f"scripted:{path}")
    assert isinstance(sp, ScriptedProposer)
    llm = make_proposer("llm", endpoint="http://mock.local", model="m")
    assert isinstance(llm, LlmProposer)
    with pytest.raises(ValueError):
        make_proposer("nonsense")


# ---------------------------------------------------------------------------
# houdini
# ---------------------------------------------------------------------------

def test_atom_pool_shape():
    p = parse_program(load_corpus_source("bench122"), name="bench122")
    pool = build_atom_pool(p)
    texts = {a.text for a in pool}
    assert "(= sn (+ i (- 1)))" in texts  # sn = i + c family
    assert "(>= i 1)" in texts
    assert "(<= (- i size) 1)" in texts
    assert "(<= (+ sn i) 2)" in texts  # v + w family
    assert len(texts) == len(pool)  # deduplicated


def test_houdini_count_up_succeeds(solver_config):
    p = parse_program(COUNT_UP, name="count_up")
    t = make_template(p)
    result = houdini_synthesize(p, t, solver_config)
    assert result.succeeded
    texts = {a.text for a in result.surviving}
    assert "(<= x 5)" in texts
    assert "(>= x 0)" in texts
    # surviving atoms hold at every reachable loop-head state
    ex = explore(p)
    from loopinv.interp import eval_expr

    for atom in result.surviving:
        for s in ex.head_states:
            assert eval_expr(atom.formula, ex.env(s)) is True, atom.text


def test_houdini_success_reverifies(solver_config):
    from loopinv.orchestrator import SynthesisConfig, verify_only

    p = parse_program(COUNT_UP, name="count_up")
    t = make_template(p)
    result = houdini_synthesize(p, t, solver_config)
    assert result.succeeded
    verdicts = verify_only(p, result.invariant, SynthesisConfig(solver=solver_config))
    assert all(v.kind is VerdictKind.VALID for v in verdicts)


def test_houdini_false_postcondition_fails(solver_config):
    p = parse_program("int x; x = 0; while (x < 3) { x = x + 1; } assert(false);", name="f")
    t = make_template(p)
    result = houdini_synthesize(p, t, solver_config)
    assert not result.succeeded
    assert "postcondition" in result.failure_reason


def test_houdini_false_guard_keeps_init_pool(solver_config):
    p = parse_program("int x; x = 3; while (false) { x = 0; } assert(x == 3);", name="g")
    t = make_template(p)
    result = houdini_synthesize(p, t, solver_config)
    assert result.succeeded
    texts = {a.text for a in result.surviving}
    assert "(= x 3)" in texts  # inductiveness was vacuous; init filtering remains


def test_houdini_deterministic(solver_config):
    p = parse_program(COUNT_UP, name="count_up")
    t = make_template(p)
    a = houdini_synthesize(p, t, solver_config)
    b = houdini_synthesize(p, t, solver_config)
    assert [x.text for x in a.surviving] == [x.text for x in b.surviving]
    assert a.invariant == b.invariant


def test_houdini_monotone_and_bounded(solver_config):
    # Surviving atoms are a sub-multiset of the pool (in pool order) and the
    # fixpoint needs at most |pool| + 2 rounds (each round drops something).
    p = parse_program(COUNT_UP, name="count_up")
    pool = build_atom_pool(p)
    t = make_template(p)
    result = houdini_synthesize(p, t, solver_config)
    pool_texts = [a.text for a in pool]
    surviving_texts = [a.text for a in result.surviving]
    assert set(surviving_texts) <= set(pool_texts)
    assert surviving_texts == [t_ for t_ in pool_texts if t_ in set(surviving_texts)]
    assert result.rounds <= len(pool) + 2
    assert result.solver_calls <= len(pool) + 3


def test_houdini_proposer_repeats_candidate_on_repair(solver_config):
    p = parse_program(COUNT_UP, name="count_up")
    t = make_template(p)
    prop = HoudiniProposer(p, t, solver_config)
    first = prop.propose(ProposalContext(COUNT_UP, "{}", t.texts, (), None, 1))
    fb = Feedback("counterexample", "postcondition", "x = 9")
    again = prop.propose(ProposalContext(
        COUNT_UP, "{}", t.texts,
        (HistoryEntry(first.candidate.smt_text, "note"),), fb, 2,
    ))
    assert again.candidate.smt_text == first.candidate.smt_text
