"""Houdini-style enumerative invariant inference.

Builds a pool of linear atoms over the program variables, then iteratively
drops atoms falsified by initialization or inductiveness counterexamples
until the surviving conjunction is inductive.  The run succeeds when that
conjunction also discharges the postcondition check.  Entirely offline and
deterministic: the pool order is fixed and every solver query is a plain
spliced check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Optional

from . import interp
from .ast_nodes import (
    Arith, Cmp, Expr, IntLit, Program, Var, conj, free_vars, walk,
)
from .proposers import Proposal, ProposalContext, ProposerError, build_prompt
from .smt import CheckVerdict, ModelValues, SolverConfig, VerdictKind, check_script
from .vcgen import Invariant, SmtTemplate, expr_to_smt, primed, splice

_RELATIONS = ("<=", ">=", "==")


@dataclass(frozen=True)
class Atom:
    formula: Expr
    text: str  # SMT rendering, used as the dedup key


@dataclass
class HoudiniResult:
    invariant: Optional[Invariant]  # None on failure
    surviving: tuple[Atom, ...]
    rounds: int
    solver_calls: int
    failure_reason: str = ""

    @property
    def succeeded(self) -> bool:
        return self.invariant is not None


class HoudiniError(Exception):
    pass


def _program_literals(program: Program) -> list[int]:
    values: set[int] = set()
    exprs: list[Expr] = [program.guard, program.postcondition]
    if program.explicit_precondition is not None:
        exprs.append(program.explicit_precondition)
    from .ast_nodes import Assign, Assume, If, Seq, Stmt

    def stmt_exprs(s: Stmt) -> None:
        if isinstance(s, Assign):
            exprs.append(s.value)
        elif isinstance(s, Assume):
            exprs.append(s.cond)
        elif isinstance(s, If):
            exprs.append(s.cond)
            stmt_exprs(s.then)
            stmt_exprs(s.orelse)
        elif isinstance(s, Seq):
            for sub in s.stmts:
                stmt_exprs(sub)

    stmt_exprs(program.prefix)
    stmt_exprs(program.body)
    for e in exprs:
        for node in walk(e):
            if isinstance(node, IntLit):
                values.add(node.value)
    return sorted(values)


def constant_pool(program: Program) -> list[int]:
    """Program literals, their off-by-one neighbours, and {-1, 0, 1}."""
    literals = _program_literals(program)
    consts = set(literals) | {-1, 0, 1}
    consts |= {c + 1 for c in literals} | {c - 1 for c in literals}
    return sorted(consts)


def build_atom_pool(program: Program) -> list[Atom]:
    """Linear atoms: v ~ c, v - w ~ c, v + w ~ c, v = w + c.

    ~ ranges over <=, >=, ==; c over the constant pool.  Order is fixed and
    duplicates (by SMT text) are removed, so runs are reproducible.
    """
    consts = constant_pool(program)
    variables = program.variables
    atoms: list[Atom] = []
    seen: set[str] = set()

    def add(formula: Expr) -> None:
        text = expr_to_smt(formula)
        if text not in seen:
            seen.add(text)
            atoms.append(Atom(formula, text))

    for v in variables:
        for rel in _RELATIONS:
            for c in consts:
                add(Cmp(rel, Var(v), IntLit(c)))
    for v in variables:
        for w in variables:
            if v == w:
                continue
            for rel in _RELATIONS:
                for c in consts:
                    add(Cmp(rel, Arith("-", Var(v), Var(w)), IntLit(c)))
    for i, v in enumerate(variables):
        for w in variables[i + 1 :]:
            for rel in _RELATIONS:
                for c in consts:
                    add(Cmp(rel, Arith("+", Var(v), Var(w)), IntLit(c)))
    for v in variables:
        for w in variables:
            if v == w:
                continue
            for c in consts:
                add(Cmp("==", Var(v), Arith("+", Var(w), IntLit(c))))
    return atoms


def _conjunction(atoms: list[Atom]) -> Invariant:
    formula = conj(*(a.formula for a in atoms))
    return Invariant(smt_text=expr_to_smt(formula), formula=formula)


def _atom_false_under(atom: Atom, model: ModelValues, rename: dict[str, str]) -> bool:
    env = {}
    for var in free_vars(atom.formula):
        source = rename.get(var, var)
        env[var] = model.get(source, 0)
    return interp.eval_expr(atom.formula, env) is False


def houdini_synthesize(
    program: Optional[Program],
    template: SmtTemplate,
    config: SolverConfig,
    max_rounds: Optional[int] = None,
) -> HoudiniResult:
    """Run the fixpoint; ``program`` may be None for external templates, in
    which case atoms are built over the template's variable list with the
    default constant pool."""
    if program is not None:
        pool = build_atom_pool(program)
    else:
        pool = _pool_for_variables(template.variables)
    if max_rounds is None:
        max_rounds = len(pool) + 2

    primed_rename = {v: primed(v) for v in template.variables}
    active = list(pool)
    rounds = 0
    calls = 0

    def run_check(obligation: str) -> CheckVerdict:
        nonlocal calls
        calls += 1
        bundle = splice(template, _conjunction(active))
        return check_script(bundle.script(obligation), config)

    def drop_falsified(model: ModelValues, rename: dict[str, str]) -> int:
        nonlocal active
        before = len(active)
        active = [a for a in active if not _atom_false_under(a, model, rename)]
        return before - len(active)

    # Phase 1: initialization.  Dropping atoms only weakens the conjunction,
    # so once this passes it stays passed.
    while True:
        rounds += 1
        if rounds > max_rounds:
            return HoudiniResult(None, tuple(active), rounds, calls, "round limit exceeded")
        verdict = run_check("initialization")
        if verdict.kind is VerdictKind.VALID:
            break
        if verdict.kind is not VerdictKind.COUNTEREXAMPLE:
            raise HoudiniError(f"initialization check: {verdict.describe()}")
        if drop_falsified(verdict.model, {}) == 0:
            return HoudiniResult(None, tuple(active), rounds, calls,
                                 "counterexample falsified no atom (partial model)")

    # Phase 2: inductiveness fixpoint; atoms are judged on their primed values.
    while True:
        rounds += 1
        if rounds > max_rounds:
            return HoudiniResult(None, tuple(active), rounds, calls, "round limit exceeded")
        verdict = run_check("inductiveness")
        if verdict.kind is VerdictKind.VALID:
            break
        if verdict.kind is not VerdictKind.COUNTEREXAMPLE:
            raise HoudiniError(f"inductiveness check: {verdict.describe()}")
        if drop_falsified(verdict.model, primed_rename) == 0:
            return HoudiniResult(None, tuple(active), rounds, calls,
                                 "counterexample falsified no atom (partial model)")

    # Postcondition decides success; there is nothing left to weaken.
    rounds += 1
    verdict = run_check("postcondition")
    calls_total = calls
    if verdict.kind is VerdictKind.VALID:
        return HoudiniResult(_conjunction(active), tuple(active), rounds, calls_total)
    if verdict.kind is VerdictKind.COUNTEREXAMPLE:
        return HoudiniResult(None, tuple(active), rounds, calls_total,
                             "surviving conjunction does not imply the postcondition")
    raise HoudiniError(f"postcondition check: {verdict.describe()}")


def _pool_for_variables(variables: Iterable[str]) -> list[Atom]:
    consts = [-1, 0, 1]
    atoms: list[Atom] = []
    seen: set[str] = set()

    def add(formula: Expr) -> None:
        text = expr_to_smt(formula)
        if text not in seen:
            seen.add(text)
            atoms.append(Atom(formula, text))

    variables = tuple(variables)
    for v in variables:
        for rel in _RELATIONS:
            for c in consts:
                add(Cmp(rel, Var(v), IntLit(c)))
    for v in variables:
        for w in variables:
            if v != w:
                for rel in _RELATIONS:
                    for c in consts:
                        add(Cmp(rel, Arith("-", Var(v), Var(w)), IntLit(c)))
    return atoms


class HoudiniProposer:
    """Adapter exposing the fixpoint as a one-candidate-per-call proposer.

    The fixpoint runs on the first attempt.  On repair attempts the previous
    candidate is returned unchanged: dropping atoms can only weaken a
    conjunction, so no counterexample-driven repair is possible here.
    """

    proposer_id = "houdini"

    def __init__(self, program: Optional[Program], template: SmtTemplate,
                 solver_config: SolverConfig):
        self.program = program
        self.template = template
        self.solver_config = solver_config

    def propose(self, ctx: ProposalContext) -> Proposal:
        prompt = build_prompt(ctx)
        start = time.monotonic()
        if ctx.attempt_index > 1 and ctx.history:
            text = ctx.history[-1].candidate_text
            return Proposal(
                candidate=Invariant(smt_text=text),
                raw_response=text,
                proposer_id=self.proposer_id,
                latency_ms=(time.monotonic() - start) * 1000.0,
                prompt=prompt,
            )
        try:
            result = houdini_synthesize(self.program, self.template, self.solver_config)
        except HoudiniError as exc:
            raise ProposerError(f"enumerative proposer failed: {exc}") from exc
        candidate = result.invariant or _conjunction(list(result.surviving))
        return Proposal(
            candidate=candidate,
            raw_response=candidate.smt_text,
            proposer_id=self.proposer_id,
            latency_ms=(time.monotonic() - start) * 1000.0,
            prompt=prompt,
        )
