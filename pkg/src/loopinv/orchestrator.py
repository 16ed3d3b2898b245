"""The generate-and-check loop.

Each iteration asks the proposer for one candidate, splices it into the
template, and checks the three obligations in order (initialization,
inductiveness, postcondition), short-circuiting at the first failure.  The
failure - counterexample model, parse-error message, or a timeout note - is
fed back verbatim into the next proposal prompt.  The loop stops on success,
at the iteration cap, or on an unrecoverable proposer/solver error.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .ast_nodes import Program
from .proposers import (
    Feedback, HistoryEntry, Proposal, ProposalContext, ProposerError,
    make_proposer, render_counterexample,
)
from .smt import CheckVerdict, SolverConfig, VerdictKind, check_script
from .vcgen import Invariant, OBLIGATIONS, SmtTemplate, make_template, splice


class SynthesisStatus(Enum):
    SOLVED = "solved"
    EXHAUSTED = "exhausted"
    PROPOSER_ERROR = "proposer-error"
    SOLVER_ERROR = "solver-error"


@dataclass(frozen=True)
class SynthesisConfig:
    max_iterations: int = 5
    solver: Optional[SolverConfig] = None  # resolved lazily (env/PATH) if None
    proposer_id: str = "houdini"
    random_seed: int = 0  # reserved for enumerative tie-breaking
    endpoint: str = ""
    model: str = ""

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def solver_config(self) -> SolverConfig:
        return self.solver if self.solver is not None else SolverConfig.default()


@dataclass
class CheckRecord:
    obligation: str
    verdict: CheckVerdict


@dataclass
class IterationRecord:
    attempt: int
    proposal: Proposal
    scripts: tuple[str, str, str] = ("", "", "")  # spliced init/inductive/post
    checks: list[CheckRecord] = field(default_factory=list)
    feedback: Optional[Feedback] = None  # what the NEXT attempt will see

    @property
    def all_valid(self) -> bool:
        return len(self.checks) == len(OBLIGATIONS) and all(
            c.verdict.is_valid for c in self.checks
        )


@dataclass
class SynthesisTrace:
    program_name: str
    status: SynthesisStatus
    iterations: list[IterationRecord]
    winning_invariant: Optional[Invariant]
    wall_clock_ms: float
    error: str = ""

    @property
    def proposal_count(self) -> int:
        return len(self.iterations)

    @property
    def peak_solver_memory_mb(self) -> float:
        peaks = [c.verdict.memory_mb for it in self.iterations for c in it.checks]
        return max(peaks, default=0.0)

    @property
    def total_solver_time_ms(self) -> float:
        return sum(c.verdict.time_ms for it in self.iterations for c in it.checks)


Target = Union[Program, SmtTemplate]


def _template_of(target: Target) -> SmtTemplate:
    if isinstance(target, SmtTemplate):
        return target
    return make_template(target)


def _context_inputs(target: Target) -> tuple[str, str]:
    """(source_text, cfg_json) for prompts; empty for external templates."""
    if isinstance(target, Program):
        from .ast_nodes import program_to_source
        from .cfg import build_cfg, cfg_to_json

        return program_to_source(target), cfg_to_json(build_cfg(target))
    return "", ""


def _feedback_for(obligation: str, verdict: CheckVerdict,
                  variables: tuple[str, ...]) -> Feedback:
    if verdict.kind is VerdictKind.COUNTEREXAMPLE:
        return Feedback(
            kind="counterexample",
            obligation=obligation,
            text=render_counterexample(verdict.model or {}, variables),
        )
    if verdict.kind is VerdictKind.PARSE_ERROR:
        return Feedback(kind="parse-error", obligation=obligation, text=verdict.message)
    if verdict.kind is VerdictKind.TIMEOUT:
        return Feedback(kind="timeout", obligation=obligation,
                        text=f"solver timeout on {obligation}")
    raise ValueError(f"no feedback for verdict {verdict.kind}")


def _verdict_note(feedback: Feedback) -> str:
    return f"{feedback.kind} on the {feedback.obligation} check"


def synthesize(target: Target, config: SynthesisConfig,
               proposer=None) -> SynthesisTrace:
    """Run the loop; returns a full trace (never raises for per-run failures).

    A ready-made proposer instance may be passed directly; otherwise one is
    built from config.proposer_id.
    """
    started = time.monotonic()
    template = _template_of(target)
    solver = config.solver_config()
    if proposer is None:
        proposer = make_proposer(
            config.proposer_id,
            program=target if isinstance(target, Program) else None,
            template=template,
            solver_config=solver,
            endpoint=config.endpoint,
            model=config.model,
        )

    source_text, cfg_json = _context_inputs(target)
    iterations: list[IterationRecord] = []
    history: list[HistoryEntry] = []
    feedback: Optional[Feedback] = None
    status = SynthesisStatus.EXHAUSTED
    winning: Optional[Invariant] = None
    error = ""

    for attempt in range(1, config.max_iterations + 1):
        ctx = ProposalContext(
            source_text=source_text,
            cfg_json=cfg_json,
            template_texts=template.texts,
            history=tuple(history),
            feedback=feedback,
            attempt_index=attempt,
        )
        try:
            proposal = proposer.propose(ctx)
        except ProposerError as exc:
            status = SynthesisStatus.PROPOSER_ERROR
            error = str(exc)
            break

        bundle = splice(template, proposal.candidate)
        record = IterationRecord(
            attempt=attempt,
            proposal=proposal,
            scripts=(bundle.init_script, bundle.inductive_script, bundle.post_script),
        )
        iterations.append(record)

        failed: Optional[Feedback] = None
        solver_failed = False
        for obligation in OBLIGATIONS:
            verdict = check_script(bundle.script(obligation), solver)
            record.checks.append(CheckRecord(obligation, verdict))
            if verdict.is_valid:
                continue
            if verdict.kind is VerdictKind.SOLVER_FAILURE:
                status = SynthesisStatus.SOLVER_ERROR
                error = f"{obligation}: {verdict.message}"
                solver_failed = True
            else:
                failed = _feedback_for(obligation, verdict, template.variables)
            break  # short-circuit on the first non-valid verdict

        if solver_failed:
            break
        if failed is None:
            status = SynthesisStatus.SOLVED
            winning = proposal.candidate
            break
        record.feedback = failed
        feedback = failed
        history.append(HistoryEntry(proposal.candidate.smt_text, _verdict_note(failed)))

    wall_ms = (time.monotonic() - started) * 1000.0
    return SynthesisTrace(
        program_name=template.name,
        status=status,
        iterations=iterations,
        winning_invariant=winning,
        wall_clock_ms=wall_ms,
        error=error,
    )


def verify_only(target: Target, candidate: Invariant,
                config: SynthesisConfig) -> tuple[CheckVerdict, CheckVerdict, CheckVerdict]:
    """One splice-and-check pass over all three obligations (no short-circuit)."""
    template = _template_of(target)
    solver = config.solver_config()
    bundle = splice(template, candidate)
    return tuple(  # type: ignore[return-value]
        check_script(bundle.script(obligation), solver) for obligation in OBLIGATIONS
    )


# ---------------------------------------------------------------------------
# Trace serialization (schema documented in the README)
# ---------------------------------------------------------------------------

def _verdict_to_dict(v: CheckVerdict) -> dict:
    out: dict = {
        "verdict": v.kind.value,
        "time_ms": round(v.time_ms, 3),
        "memory_mb": round(v.memory_mb, 3),
    }
    if v.model is not None:
        out["model"] = dict(sorted(v.model.items()))
        out["defaulted"] = sorted(v.model.defaulted)
    if v.message:
        out["message"] = v.message
    if v.exit_status is not None:
        out["exit_status"] = v.exit_status
    return out


def trace_to_dict(trace: SynthesisTrace, template: Optional[SmtTemplate] = None,
                  scripts: bool = True) -> dict:
    doc: dict = {
        "program": trace.program_name,
        "status": trace.status.value,
        "winning_invariant": trace.winning_invariant.smt_text if trace.winning_invariant else None,
        "totals": {
            "wall_clock_ms": round(trace.wall_clock_ms, 3),
            "proposals": trace.proposal_count,
            "peak_solver_memory_mb": round(trace.peak_solver_memory_mb, 3),
            "solver_time_ms": round(trace.total_solver_time_ms, 3),
        },
        "error": trace.error,
        "iterations": [],
    }
    for it in trace.iterations:
        entry: dict = {
            "attempt": it.attempt,
            "proposer_id": it.proposal.proposer_id,
            "prompt": it.proposal.prompt,
            "raw_response": it.proposal.raw_response,
            "candidate": it.proposal.candidate.smt_text,
            "latency_ms": round(it.proposal.latency_ms, 3),
            "scripts": {
                "initialization": it.scripts[0],
                "inductiveness": it.scripts[1],
                "postcondition": it.scripts[2],
            },
            "checks": [
                {"obligation": c.obligation, **_verdict_to_dict(c.verdict)}
                for c in it.checks
            ],
            "feedback": (
                {"kind": it.feedback.kind, "obligation": it.feedback.obligation,
                 "text": it.feedback.text}
                if it.feedback is not None else None
            ),
        }
        doc["iterations"].append(entry)
    if scripts and template is not None:
        doc["template"] = {
            "initialization": template.init_text,
            "inductiveness": template.inductive_text,
            "postcondition": template.post_text,
        }
    return doc


def write_trace(trace: SynthesisTrace, path: str | Path,
                template: Optional[SmtTemplate] = None) -> None:
    Path(path).write_text(json.dumps(trace_to_dict(trace, template), indent=2) + "\n")
