"""Candidate-invariant proposers.

Three interchangeable sources of candidates:

* LlmProposer      - chat-completions endpoint client (temperature pinned to 0)
* ScriptedProposer - replays a fixed candidate list (tests, trace replay)
* HoudiniProposer  - deterministic offline baseline (see houdini.py)

The prompt layout below is fixed so that traces are replayable; the repair
prompt always carries the previous candidates, the most recent solver
feedback, and the instruction line verbatim.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import httpx

from . import sexpr
from .vcgen import Invariant

API_KEY_ENV_VAR = "LOOPINV_API_KEY"
TRANSPORT_RETRIES = 2  # retries after the first attempt

REPAIR_INSTRUCTION = "Refine the invariant to rule out this counterexample/error."

INIT_PROMPT_TEMPLATE = """\
You are given a C program with a single loop, its control-flow graph as JSON,
and three SMT-LIB templates whose @INV@ / @INV_PRIMED@ placeholders will be
filled with a candidate loop invariant.

[PROGRAM]
{source}

[CONTROL-FLOW GRAPH]
{cfg}

[SMT TEMPLATES]
{templates}

[INSTRUCTION]
Propose a loop invariant as a single SMT-LIB boolean term over the program
variables. Reply with the term only.
"""

REPAIR_PROMPT_TEMPLATE = """\
You are given a C program with a single loop, its control-flow graph as JSON,
and three SMT-LIB templates whose @INV@ / @INV_PRIMED@ placeholders will be
filled with a candidate loop invariant.

[PROGRAM]
{source}

[CONTROL-FLOW GRAPH]
{cfg}

[SMT TEMPLATES]
{templates}

[PREVIOUS CANDIDATES]
{history}

[SOLVER FEEDBACK]
{feedback}

[INSTRUCTION]
""" + REPAIR_INSTRUCTION + """
Reply with a single SMT-LIB boolean term only.
"""


class ProposerError(Exception):
    """Endpoint unreachable / bad response after the retry budget."""


class ExtractionError(ProposerError):
    """No candidate term found in a response."""

    def __init__(self, message: str, raw_response: str):
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class HistoryEntry:
    candidate_text: str
    verdict_note: str  # e.g. "counterexample on the postcondition check"


@dataclass(frozen=True)
class Feedback:
    kind: str        # 'counterexample' | 'parse-error' | 'timeout'
    obligation: str  # 'initialization' | 'inductiveness' | 'postcondition'
    text: str        # rendered payload, included verbatim in the next prompt


@dataclass(frozen=True)
class ProposalContext:
    source_text: str
    cfg_json: str
    template_texts: tuple[str, str, str]
    history: tuple[HistoryEntry, ...] = ()
    feedback: Optional[Feedback] = None
    attempt_index: int = 1

    def __post_init__(self) -> None:
        if (self.feedback is None) != (self.attempt_index == 1):
            raise ValueError("feedback must be absent exactly on the first attempt")
        if len(self.history) != self.attempt_index - 1:
            raise ValueError("history length must equal attempt_index - 1")


@dataclass(frozen=True)
class Proposal:
    candidate: Invariant
    raw_response: str
    proposer_id: str
    latency_ms: float
    prompt: str = ""  # the text sent (or that would be sent) to an LLM


def render_counterexample(model: dict, variable_order: Sequence[str] = ()) -> str:
    """Variable/value lines, program variables first."""
    lines = []
    seen = set()
    for v in variable_order:
        if v in model:
            lines.append(f"{v} = {model[v]}")
            seen.add(v)
    for v in sorted(model):
        if v not in seen:
            lines.append(f"{v} = {model[v]}")
    return "\n".join(lines)


def build_prompt(ctx: ProposalContext) -> str:
    templates = "\n".join(ctx.template_texts)
    source = ctx.source_text.strip() or "(no source text: external SMT template)"
    cfg = ctx.cfg_json.strip() or "(no control-flow graph)"
    if ctx.attempt_index == 1:
        return INIT_PROMPT_TEMPLATE.format(source=source, cfg=cfg, templates=templates)
    history = "\n".join(
        f"{i + 1}. {h.candidate_text}   ; {h.verdict_note}"
        for i, h in enumerate(ctx.history)
    )
    feedback = ctx.feedback.text if ctx.feedback is not None else ""
    return REPAIR_PROMPT_TEMPLATE.format(
        source=source, cfg=cfg, templates=templates, history=history, feedback=feedback,
    )


_FENCE_MARKER = "```"


def _strip_fences(text: str) -> str:
    if _FENCE_MARKER not in text:
        return text
    out_lines = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(_FENCE_MARKER):
            # drop the marker line entirely (```smt, ```, ...)
            continue
        out_lines.append(line)
    return "\n".join(out_lines)


def extract_invariant(raw_response: str) -> Invariant:
    """Pull the candidate term out of a free-form response.

    After code fences are stripped, the last balanced parenthesized
    s-expression wins; a bare atom like `true` is accepted as-is.  Unbalanced
    text is passed through untouched (flagged) so the solver can produce the
    parse error that drives the repair loop.
    """
    text = _strip_fences(raw_response).strip()
    if not text:
        raise ExtractionError("empty response", raw_response)
    spans = sexpr.balanced_spans(text)
    if spans:
        start, end = spans[-1]
        term = text[start:end]
        # Trailing unbalanced garbage after the last balanced span keeps the
        # response unbalanced as a whole; the balanced span still wins.
        return Invariant(smt_text=term, balanced=True)
    if "(" in text or ")" in text:
        return Invariant(smt_text=text, balanced=False)
    token = text.split()
    if len(token) == 1:
        return Invariant(smt_text=token[0], balanced=True)
    raise ExtractionError("no SMT term found in response", raw_response)


class ScriptedProposer:
    """Replays a fixed list of candidate texts, one per attempt.

    When attempts outnumber entries the last entry repeats, so a single wrong
    candidate can exercise cap semantics.
    """

    def __init__(self, candidates: Sequence[str], proposer_id: str = "scripted"):
        if not candidates:
            raise ValueError("scripted proposer needs at least one candidate")
        self.candidates = list(candidates)
        self.proposer_id = proposer_id

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProposer":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, list) or not all(isinstance(c, str) for c in data):
            raise ValueError(f"{path}: expected a JSON array of candidate strings")
        return cls(data, proposer_id=f"scripted:{path}")

    def propose(self, ctx: ProposalContext) -> Proposal:
        prompt = build_prompt(ctx)
        start = time.monotonic()
        index = min(ctx.attempt_index - 1, len(self.candidates) - 1)
        text = self.candidates[index]
        candidate = extract_invariant(text)
        return Proposal(
            candidate=candidate,
            raw_response=text,
            proposer_id=self.proposer_id,
            latency_ms=(time.monotonic() - start) * 1000.0,
            prompt=prompt,
        )


class LlmProposer:
    """Chat-completions client.

    All traffic goes through the injected httpx.Client, so tests can swap in
    httpx.MockTransport or point base_url at a local server.  Temperature is
    always sent as 0.
    """

    proposer_id = "llm"

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = API_KEY_ENV_VAR,
        client: Optional[httpx.Client] = None,
        request_timeout_s: float = 120.0,
    ):
        if not base_url:
            raise ProposerError("no chat endpoint configured")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.request_timeout_s = request_timeout_s
        self._client = client or httpx.Client()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def propose(self, ctx: ProposalContext) -> Proposal:
        prompt = build_prompt(ctx)
        body = {
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        }
        start = time.monotonic()
        last_error: Exception | None = None
        for _ in range(1 + TRANSPORT_RETRIES):
            try:
                response = self._client.post(
                    f"{self.base_url}/chat/completions",
                    json=body,
                    headers=self._headers(),
                    timeout=self.request_timeout_s,
                )
                if response.status_code // 100 != 2:
                    raise ProposerError(
                        f"endpoint returned HTTP {response.status_code}: {response.text[:200]}"
                    )
                payload = response.json()
                content = payload["choices"][0]["message"]["content"]
                break
            except (httpx.HTTPError, ProposerError, KeyError, IndexError,
                    TypeError, ValueError) as exc:
                last_error = exc
        else:
            raise ProposerError(f"chat endpoint failed after retries: {last_error}")

        latency_ms = (time.monotonic() - start) * 1000.0
        candidate = extract_invariant(content)
        return Proposal(
            candidate=candidate,
            raw_response=content,
            proposer_id=self.proposer_id,
            latency_ms=latency_ms,
            prompt=prompt,
        )


def make_proposer(
    proposer_id: str,
    *,
    program=None,
    template=None,
    solver_config=None,
    endpoint: str = "",
    model: str = "",
    client: Optional[httpx.Client] = None,
):
    """Build a proposer from its CLI identifier.

    Identifiers: `llm`, `houdini`, `scripted:<file>`.
    """
    if proposer_id == "llm":
        return LlmProposer(base_url=endpoint, model=model or "o1-mini", client=client)
    if proposer_id == "houdini":
        from .houdini import HoudiniProposer

        if template is None or solver_config is None:
            raise ValueError("the houdini proposer needs a template and a solver config")
        return HoudiniProposer(program=program, template=template, solver_config=solver_config)
    if proposer_id.startswith("scripted:"):
        return ScriptedProposer.from_file(proposer_id.split(":", 1)[1])
    raise ValueError(f"unknown proposer id {proposer_id!r}")
