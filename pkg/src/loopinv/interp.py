"""Brute-force reference interpreter.

Executes Programs directly over concrete integer states, enumerating every
nondeterministic choice from a bounded domain.  This is the independent
oracle used to cross-check the SMT route: it shares no code with vcgen or the
solver wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping

from .ast_nodes import (
    And, Arith, Assign, Assume, BoolLit, Cmp, Expr, Havoc, If, Implies, IntLit,
    Neg, Nondet, Not, Or, Program, Seq, Skip, Stmt, Var,
)

DEFAULT_DOMAIN = tuple(range(-5, 6))

State = tuple[int, ...]  # values aligned with Program.variables


class NondetInExpr(Exception):
    """Raised internally when a deterministic evaluation meets unknown()."""


def eval_expr(e: Expr, env: Mapping[str, int]):
    """Evaluate a nondeterminism-free expression to an int or bool."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -eval_expr(e.arg, env)
    if isinstance(e, Arith):
        a, b = eval_expr(e.left, env), eval_expr(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        return a * b
    if isinstance(e, Cmp):
        a, b = eval_expr(e.left, env), eval_expr(e.right, env)
        return {
            "==": a == b, "!=": a != b, "<": a < b,
            "<=": a <= b, ">": a > b, ">=": a >= b,
        }[e.op]
    if isinstance(e, Not):
        return not eval_expr(e.arg, env)
    if isinstance(e, And):
        return all(eval_expr(a, env) for a in e.args)
    if isinstance(e, Or):
        return any(eval_expr(a, env) for a in e.args)
    if isinstance(e, Implies):
        return (not eval_expr(e.lhs, env)) or eval_expr(e.rhs, env)
    if isinstance(e, Nondet):
        raise NondetInExpr()
    raise TypeError(f"unknown expression {e!r}")


def expr_values(e: Expr, env: Mapping[str, int], domain: Iterable[int]) -> set:
    """All possible values of an expression, enumerating unknown() markers.

    Integer markers range over the domain, boolean markers over {False, True}.
    """
    markers = [n for n in _nondets(e)]
    if not markers:
        return {eval_expr(e, env)}
    choices = []
    for m in markers:
        choices.append((False, True) if m.sort == "bool" else tuple(domain))
    out = set()
    for combo in product(*choices):
        picks = iter(combo)
        out.add(_eval_with_picks(e, env, picks))
    return out


def _nondets(e: Expr) -> list[Nondet]:
    out: list[Nondet] = []

    def go(x: Expr) -> None:
        if isinstance(x, Nondet):
            out.append(x)
        elif isinstance(x, Neg):
            go(x.arg)
        elif isinstance(x, (Arith, Cmp)):
            go(x.left), go(x.right)
        elif isinstance(x, Not):
            go(x.arg)
        elif isinstance(x, (And, Or)):
            for a in x.args:
                go(a)
        elif isinstance(x, Implies):
            go(x.lhs), go(x.rhs)

    go(e)
    return out


def _eval_with_picks(e: Expr, env: Mapping[str, int], picks) -> object:
    # Re-evaluates with each Nondet occurrence replaced by the next pick; the
    # traversal order must match _nondets (it does: both are left-to-right).
    if isinstance(e, Nondet):
        return next(picks)
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval_with_picks(e.arg, env, picks)
    if isinstance(e, Arith):
        a = _eval_with_picks(e.left, env, picks)
        b = _eval_with_picks(e.right, env, picks)
        return {"+": a + b, "-": a - b, "*": a * b}[e.op]
    if isinstance(e, Cmp):
        a = _eval_with_picks(e.left, env, picks)
        b = _eval_with_picks(e.right, env, picks)
        return {
            "==": a == b, "!=": a != b, "<": a < b,
            "<=": a <= b, ">": a > b, ">=": a >= b,
        }[e.op]
    if isinstance(e, Not):
        return not _eval_with_picks(e.arg, env, picks)
    if isinstance(e, And):
        vals = [_eval_with_picks(a, env, picks) for a in e.args]  # no short-circuit: consume all picks
        return all(vals)
    if isinstance(e, Or):
        vals = [_eval_with_picks(a, env, picks) for a in e.args]
        return any(vals)
    if isinstance(e, Implies):
        a = _eval_with_picks(e.lhs, env, picks)
        b = _eval_with_picks(e.rhs, env, picks)
        return (not a) or b
    raise TypeError(f"unknown expression {e!r}")


def exec_stmt(stmt: Stmt, states: set[State], variables: tuple[str, ...],
              domain: Iterable[int] = DEFAULT_DOMAIN) -> set[State]:
    """All states reachable by executing a loop-free statement.

    assume() filters; unknown() fans out over the domain.
    """
    index = {v: i for i, v in enumerate(variables)}

    def env_of(s: State) -> dict[str, int]:
        return dict(zip(variables, s))

    def run(st: Stmt, current: set[State]) -> set[State]:
        if isinstance(st, Skip):
            return current
        if isinstance(st, Seq):
            for sub in st.stmts:
                current = run(sub, current)
            return current
        if isinstance(st, Assign):
            out: set[State] = set()
            for s in current:
                for val in expr_values(st.value, env_of(s), domain):
                    new = list(s)
                    new[index[st.var]] = int(val)
                    out.add(tuple(new))
            return out
        if isinstance(st, Havoc):
            out = set()
            for s in current:
                for val in domain:
                    new = list(s)
                    new[index[st.var]] = val
                    out.add(tuple(new))
            return out
        if isinstance(st, Assume):
            out = set()
            for s in current:
                if True in expr_values(st.cond, env_of(s), domain):
                    out.add(s)
            return out
        if isinstance(st, If):
            out = set()
            for s in current:
                branches = expr_values(st.cond, env_of(s), domain)
                if True in branches:
                    out |= run(st.then, {s})
                if False in branches:
                    out |= run(st.orelse, {s})
            return out
        raise TypeError(f"unknown statement {st!r}")

    return run(stmt, states)


@dataclass
class Exploration:
    """Reachable-state summary of one Program under bounded execution."""

    variables: tuple[str, ...]
    head_states: set[State] = field(default_factory=set)
    exit_states: set[State] = field(default_factory=set)
    truncated: bool = False  # hit the iteration cap with work remaining

    def env(self, state: State) -> dict[str, int]:
        return dict(zip(self.variables, state))


def explore(program: Program,
            domain: Iterable[int] = DEFAULT_DOMAIN,
            max_iters: int = 100) -> Exploration:
    """Enumerate loop-head and exit states.

    Initial variable values range over the domain; the explicit precondition
    and prefix are applied; then the loop runs up to max_iters iterations
    (breadth-first with deduplication).  Exit states are loop-head states
    where the guard can evaluate to false.
    """
    domain = tuple(domain)
    variables = program.variables
    initial: set[State] = set(product(domain, repeat=len(variables)))
    if program.explicit_precondition is not None:
        initial = exec_stmt(Assume(program.explicit_precondition), initial, variables, domain)
    heads = exec_stmt(program.prefix, initial, variables, domain)

    result = Exploration(variables=variables, head_states=set(heads))
    frontier = set(heads)
    for _ in range(max_iters):
        if not frontier:
            break
        next_frontier: set[State] = set()
        for s in frontier:
            guard_vals = expr_values(program.guard, result.env(s), domain)
            if False in guard_vals:
                result.exit_states.add(s)
            if True in guard_vals:
                for succ in exec_stmt(program.body, {s}, variables, domain):
                    if succ not in result.head_states:
                        result.head_states.add(succ)
                        next_frontier.add(succ)
        frontier = next_frontier
    else:
        if frontier:
            result.truncated = True
    # States in the final frontier still need their guard examined for exits.
    for s in frontier:
        if False in expr_values(program.guard, result.env(s), domain):
            result.exit_states.add(s)
    return result


def postcondition_holds(program: Program, state: State,
                        domain: Iterable[int] = DEFAULT_DOMAIN) -> bool:
    """Q at an exit state; nondeterminism in Q is demonic (all choices)."""
    env = dict(zip(program.variables, state))
    return expr_values(program.postcondition, env, domain) == {True}


def check_safety(program: Program,
                 domain: Iterable[int] = DEFAULT_DOMAIN,
                 max_iters: int = 100) -> tuple[bool, State | None]:
    """Does Q hold at every bounded-reachable exit state?

    Returns (holds, witness) where witness is a violating exit state.
    """
    ex = explore(program, domain, max_iters)
    for s in sorted(ex.exit_states):
        if not postcondition_holds(program, s, domain):
            return False, s
    return True, None
