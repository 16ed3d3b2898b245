"""Verification-condition generation.

Reduces a candidate invariant to three SMT-LIB satisfiability scripts, each
asserting the negation of one proof obligation:

    initialization:  (assert (not (=> P INV)))
    inductiveness:   (assert (not (=> (and INV B T) INV')))
    postcondition:   (assert (not (=> (and INV (not B)) Q)))

P is derived from the prefix as a strongest postcondition, T encodes one
execution of the loop body in SSA style, and INV' is the candidate with every
program variable replaced by its primed (post-state) counterpart.  Scripts are
built as templates holding the literal placeholder tokens @INV@ and
@INV_PRIMED@, and a candidate is spliced in textually so that syntactically
invalid candidates still reach the solver.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .ast_nodes import (
    And, Arith, Assign, Assume, BoolLit, Cmp, Expr, Havoc, If, Implies, IntLit,
    Neg, Nondet, Not, Or, Program, Seq, Skip, Stmt, Var,
    conj, disj, has_nondet, mentions, negate, stmt_list,
)

INV_TOKEN = "@INV@"
INV_PRIMED_TOKEN = "@INV_PRIMED@"

OBLIGATIONS = ("initialization", "inductiveness", "postcondition")


def primed(name: str) -> str:
    """Post-state symbol for a program variable ('!' cannot occur in C idents)."""
    return f"{name}!next"


# ---------------------------------------------------------------------------
# Expr -> SMT-LIB text
# ---------------------------------------------------------------------------

class _NondetNamer:
    """Hands out fresh symbols for nondeterministic markers, recording sorts."""

    def __init__(self, prefix: str = "nd"):
        self.prefix = prefix
        self.count = 0
        self.declared: list[tuple[str, str]] = []

    def fresh(self, sort: str) -> str:
        self.count += 1
        name = f"{self.prefix}!{self.count}"
        self.declared.append((name, "Bool" if sort == "bool" else "Int"))
        return name


def expr_to_smt(e: Expr, rename: Optional[dict[str, str]] = None,
                nondet: Optional[_NondetNamer] = None) -> str:
    """Render an expression as an SMT-LIB term.

    rename maps variable names to symbols (identity when absent); each
    nondeterministic marker becomes a fresh free symbol from the namer.
    """
    r = rename or {}

    def go(x: Expr) -> str:
        if isinstance(x, IntLit):
            return str(x.value) if x.value >= 0 else f"(- {-x.value})"
        if isinstance(x, BoolLit):
            return "true" if x.value else "false"
        if isinstance(x, Var):
            return r.get(x.name, x.name)
        if isinstance(x, Neg):
            return f"(- {go(x.arg)})"
        if isinstance(x, Arith):
            return f"({x.op} {go(x.left)} {go(x.right)})"
        if isinstance(x, Cmp):
            if x.op == "==":
                return f"(= {go(x.left)} {go(x.right)})"
            if x.op == "!=":
                return f"(not (= {go(x.left)} {go(x.right)}))"
            return f"({x.op} {go(x.left)} {go(x.right)})"
        if isinstance(x, Not):
            return f"(not {go(x.arg)})"
        if isinstance(x, And):
            return f"(and {' '.join(go(a) for a in x.args)})"
        if isinstance(x, Or):
            return f"(or {' '.join(go(a) for a in x.args)})"
        if isinstance(x, Implies):
            return f"(=> {go(x.lhs)} {go(x.rhs)})"
        if isinstance(x, Nondet):
            if nondet is None:
                raise ValueError("nondeterministic marker in a deterministic rendering")
            return nondet.fresh(x.sort)
        raise TypeError(f"unknown expression {x!r}")

    return go(e)


# ---------------------------------------------------------------------------
# Precondition derivation (strongest postcondition of the prefix)
# ---------------------------------------------------------------------------

def subst_var(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every occurrence of a variable (Expr has no binders)."""
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, Neg):
        return Neg(subst_var(e.arg, name, replacement))
    if isinstance(e, Arith):
        return Arith(e.op, subst_var(e.left, name, replacement), subst_var(e.right, name, replacement))
    if isinstance(e, Cmp):
        return Cmp(e.op, subst_var(e.left, name, replacement), subst_var(e.right, name, replacement))
    if isinstance(e, Not):
        return Not(subst_var(e.arg, name, replacement))
    if isinstance(e, And):
        return And(tuple(subst_var(a, name, replacement) for a in e.args))
    if isinstance(e, Or):
        return Or(tuple(subst_var(a, name, replacement) for a in e.args))
    if isinstance(e, Implies):
        return Implies(subst_var(e.lhs, name, replacement), subst_var(e.rhs, name, replacement))
    return e


_CMP_NEG = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def to_nnf(e: Expr) -> Expr:
    """Negation normal form; negations are pushed into comparisons."""
    if isinstance(e, Not):
        a = e.arg
        if isinstance(a, Not):
            return to_nnf(a.arg)
        if isinstance(a, BoolLit):
            return BoolLit(not a.value)
        if isinstance(a, Cmp):
            return Cmp(_CMP_NEG[a.op], a.left, a.right)
        if isinstance(a, And):
            return disj(*(to_nnf(Not(x)) for x in a.args))
        if isinstance(a, Or):
            return conj(*(to_nnf(Not(x)) for x in a.args))
        if isinstance(a, Implies):
            return conj(to_nnf(a.lhs), to_nnf(Not(a.rhs)))
        return e  # literal (boolean nondet)
    if isinstance(e, And):
        return conj(*(to_nnf(a) for a in e.args))
    if isinstance(e, Or):
        return disj(*(to_nnf(a) for a in e.args))
    if isinstance(e, Implies):
        return disj(to_nnf(Not(e.lhs)), to_nnf(e.rhs))
    return e


def forget(e: Expr, name: str) -> Expr:
    """Sound over-approximation of (exists name. e).

    In NNF, any literal mentioning the variable is weakened to true; the
    existential distributes exactly over disjunction and soundly over
    conjunction.
    """
    def drop(x: Expr) -> Expr:
        if isinstance(x, And):
            return conj(*(drop(a) for a in x.args))
        if isinstance(x, Or):
            return disj(*(drop(a) for a in x.args))
        return BoolLit(True) if mentions(x, name) else x

    return drop(to_nnf(e)) if mentions(e, name) else e


def _forget_nondet_literals(e: Expr) -> Expr:
    """Weaken literals containing unknown() to true (angelic, for assume/if)."""
    def drop(x: Expr) -> Expr:
        if isinstance(x, And):
            return conj(*(drop(a) for a in x.args))
        if isinstance(x, Or):
            return disj(*(drop(a) for a in x.args))
        return BoolLit(True) if has_nondet(x) else x

    return drop(to_nnf(e)) if has_nondet(e) else e


def _solve_equation_for(l: Expr, r: Expr, name: str) -> Optional[Expr]:
    """Solve l == r for a variable occurring exactly once with unit coefficient."""
    def count(x: Expr) -> int:
        return sum(1 for _ in _var_occurrences(x, name))

    cl, cr = count(l), count(r)
    if cl == 1 and cr == 0:
        holder, target = l, r
    elif cr == 1 and cl == 0:
        holder, target = r, l
    else:
        return None

    def isolate(x: Expr, t: Expr) -> Optional[Expr]:
        if isinstance(x, Var) and x.name == name:
            return t
        if isinstance(x, Neg):
            return isolate(x.arg, Neg(t))
        if isinstance(x, Arith) and x.op == "+":
            if mentions(x.left, name):
                return isolate(x.left, Arith("-", t, x.right))
            return isolate(x.right, Arith("-", t, x.left))
        if isinstance(x, Arith) and x.op == "-":
            if mentions(x.left, name):
                return isolate(x.left, Arith("+", t, x.right))
            return isolate(x.right, Arith("-", x.left, t))
        return None  # multiplication or deeper structure: give up

    return isolate(holder, target)


def _var_occurrences(e: Expr, name: str):
    from .ast_nodes import walk
    for n in walk(e):
        if isinstance(n, Var) and n.name == name:
            yield n


def _eliminate(phi: Expr, name: str) -> Expr:
    """∃name.phi — by definitional substitution when possible, else forget."""
    if not mentions(phi, name):
        return phi
    parts = list(phi.args) if isinstance(phi, And) else [phi]
    for idx, part in enumerate(parts):
        if isinstance(part, Cmp) and part.op == "==":
            solution = _solve_equation_for(part.left, part.right, name)
            if solution is not None and not mentions(solution, name):
                rest = parts[:idx] + parts[idx + 1 :]
                substituted = [subst_var(p, name, solution) for p in rest]
                return conj(*substituted)
    return forget(phi, name)


_OLD = "old!0"  # scratch symbol for the pre-assignment value; never escapes


def strongest_postcondition(stmt: Stmt, phi: Expr) -> Expr:
    """sp of loop-free code; auxiliary symbols are eliminated or forgotten."""
    if isinstance(stmt, Skip):
        return phi
    if isinstance(stmt, Seq):
        for sub in stmt.stmts:
            phi = strongest_postcondition(sub, phi)
        return phi
    if isinstance(stmt, Havoc):
        return forget(phi, stmt.var)
    if isinstance(stmt, Assume):
        return conj(phi, _forget_nondet_literals(stmt.cond))
    if isinstance(stmt, Assign):
        if has_nondet(stmt.value):
            return forget(phi, stmt.var)
        old = Var(_OLD)
        shifted = subst_var(phi, stmt.var, old)
        equation = Cmp("==", Var(stmt.var), subst_var(stmt.value, stmt.var, old))
        return _eliminate(conj(shifted, equation), _OLD)
    if isinstance(stmt, If):
        if has_nondet(stmt.cond):
            then_in, else_in = phi, phi
        else:
            then_in = conj(phi, stmt.cond)
            else_in = conj(phi, negate(stmt.cond))
        return disj(
            strongest_postcondition(stmt.then, then_in),
            strongest_postcondition(stmt.orelse, else_in),
        )
    raise TypeError(f"unknown statement {stmt!r}")


def derive_precondition(program: Program) -> Expr:
    """P at the loop head: the explicit precondition if one was given, pushed
    through the prefix; otherwise the prefix's strongest postcondition from an
    unconstrained initial state (true when there is no prefix either)."""
    start = program.explicit_precondition if program.explicit_precondition is not None else BoolLit(True)
    if isinstance(program.prefix, Skip):
        return start
    return strongest_postcondition(program.prefix, start)


# ---------------------------------------------------------------------------
# Transition relation (SSA encoding of the body)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionRelation:
    pre_state_vars: tuple[str, ...]
    post_state_vars: tuple[str, ...]
    aux_vars: tuple[tuple[str, str], ...]  # (symbol, smt sort)
    formula: Expr


class _Ssa:
    def __init__(self, variables: tuple[str, ...]):
        self.counters = {v: 0 for v in variables}
        self.nondet = 0
        self.aux: list[tuple[str, str]] = []

    def fresh_version(self, var: str) -> str:
        self.counters[var] += 1
        name = f"{var}!{self.counters[var]}"
        self.aux.append((name, "Int"))
        return name

    def fresh_nondet(self, sort: str) -> str:
        self.nondet += 1
        name = f"nd!{self.nondet}"
        self.aux.append((name, "Bool" if sort == "bool" else "Int"))
        return name


def _symbolic(e: Expr, env: dict[str, str], ssa: _Ssa) -> Expr:
    """Rewrite an expression over current SSA versions; unknown() becomes a
    fresh unconstrained symbol."""
    if isinstance(e, Var):
        return Var(env[e.name])
    if isinstance(e, Nondet):
        return Var(ssa.fresh_nondet(e.sort))
    if isinstance(e, Neg):
        return Neg(_symbolic(e.arg, env, ssa))
    if isinstance(e, Arith):
        return Arith(e.op, _symbolic(e.left, env, ssa), _symbolic(e.right, env, ssa))
    if isinstance(e, Cmp):
        return Cmp(e.op, _symbolic(e.left, env, ssa), _symbolic(e.right, env, ssa))
    if isinstance(e, Not):
        return Not(_symbolic(e.arg, env, ssa))
    if isinstance(e, And):
        return And(tuple(_symbolic(a, env, ssa) for a in e.args))
    if isinstance(e, Or):
        return Or(tuple(_symbolic(a, env, ssa) for a in e.args))
    if isinstance(e, Implies):
        return Implies(_symbolic(e.lhs, env, ssa), _symbolic(e.rhs, env, ssa))
    return e


def _encode(stmt: Stmt, env: dict[str, str], ssa: _Ssa,
            variables: tuple[str, ...]) -> tuple[list[Expr], dict[str, str]]:
    constraints: list[Expr] = []
    for s in stmt_list(stmt):
        if isinstance(s, Assign):
            value = _symbolic(s.value, env, ssa)
            version = ssa.fresh_version(s.var)
            constraints.append(Cmp("==", Var(version), value))
            env = env | {s.var: version}
        elif isinstance(s, Havoc):
            version = ssa.fresh_version(s.var)
            env = env | {s.var: version}
        elif isinstance(s, Assume):
            constraints.append(_symbolic(s.cond, env, ssa))
        elif isinstance(s, If):
            cond = _symbolic(s.cond, env, ssa)
            then_cs, then_env = _encode(s.then, env, ssa, variables)
            else_cs, else_env = _encode(s.orelse, env, ssa, variables)
            joined = env
            then_joins: list[Expr] = []
            else_joins: list[Expr] = []
            for v in variables:
                if then_env[v] != else_env[v]:
                    join = ssa.fresh_version(v)
                    then_joins.append(Cmp("==", Var(join), Var(then_env[v])))
                    else_joins.append(Cmp("==", Var(join), Var(else_env[v])))
                    joined = joined | {v: join}
            constraints.append(Implies(cond, conj(*then_cs, *then_joins)))
            constraints.append(Implies(negate(cond), conj(*else_cs, *else_joins)))
            env = joined
        elif isinstance(s, Skip):
            continue
        else:  # pragma: no cover
            raise TypeError(f"unexpected statement {s!r}")
    return constraints, env


def encode_body(body: Stmt, variables: tuple[str, ...]) -> TransitionRelation:
    """SSA-compose the loop body into a pre/post-state transition formula.

    Unmodified variables are constrained with x' = x; havocs and unknown()
    markers become unconstrained fresh symbols.
    """
    ssa = _Ssa(variables)
    env = {v: v for v in variables}
    constraints, env = _encode(body, env, ssa, variables)
    for v in variables:
        constraints.append(Cmp("==", Var(primed(v)), Var(env[v])))
    return TransitionRelation(
        pre_state_vars=tuple(variables),
        post_state_vars=tuple(primed(v) for v in variables),
        aux_vars=tuple(ssa.aux),
        formula=conj(*constraints),
    )


# ---------------------------------------------------------------------------
# Invariants, templates, bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Invariant:
    """A candidate invariant as SMT-LIB text.

    formula is present when the candidate was built from an AST (e.g. the
    enumerative proposer); free-form proposer output carries text only.
    balanced is False when the text is not even parenthesis-balanced — such
    candidates still flow to the solver so it can report the parse error.
    """

    smt_text: str
    formula: Optional[Expr] = None
    balanced: bool = True


@dataclass(frozen=True)
class VcBundle:
    init_script: str
    inductive_script: str
    post_script: str
    candidate: Invariant

    def script(self, obligation: str) -> str:
        return {
            "initialization": self.init_script,
            "inductiveness": self.inductive_script,
            "postcondition": self.post_script,
        }[obligation]


@dataclass(frozen=True)
class SmtTemplate:
    """Three placeholder scripts plus the variable list needed for priming."""

    name: str
    variables: tuple[str, ...]
    init_text: str
    inductive_text: str
    post_text: str
    declarations: str

    @property
    def texts(self) -> tuple[str, str, str]:
        return (self.init_text, self.inductive_text, self.post_text)

    def splice(self, candidate: Invariant) -> VcBundle:
        return splice(self, candidate)


def _decl_block(pairs: list[tuple[str, str]]) -> str:
    return "\n".join(f"(declare-const {name} {sort})" for name, sort in pairs)


def _script(header: str, decls: list[tuple[str, str]], assertion: str) -> str:
    parts = [
        f"; {header}",
        "(set-logic ALL)",
        _decl_block(decls),
        f"(assert (not {assertion}))",
        "(check-sat)",
        "(get-model)",
    ]
    return "\n".join(p for p in parts if p) + "\n"


def make_template(program: Program) -> SmtTemplate:
    """Emit the three negated-obligation scripts with invariant placeholders.

    Deterministic: the same Program yields byte-identical scripts.
    """
    pre = derive_precondition(program)
    relation = encode_body(program.body, program.variables)
    prog_decls = [(v, "Int") for v in program.variables]

    pre_text = expr_to_smt(pre)

    init_text = _script(
        f"initialization check for {program.name}",
        prog_decls,
        f"(=> {pre_text} {INV_TOKEN})",
    )

    ind_nondet = _NondetNamer(prefix="ndg")
    guard_ind = expr_to_smt(program.guard, nondet=ind_nondet)
    relation_text = expr_to_smt(relation.formula)
    ind_decls = (
        prog_decls
        + [(p, "Int") for p in relation.post_state_vars]
        + list(relation.aux_vars)
        + ind_nondet.declared
    )
    inductive_text = _script(
        f"inductiveness check for {program.name}",
        ind_decls,
        f"(=> (and {INV_TOKEN} {guard_ind} {relation_text}) {INV_PRIMED_TOKEN})",
    )

    post_nondet = _NondetNamer(prefix="ndg")
    guard_post = expr_to_smt(program.guard, nondet=post_nondet)
    q_text = expr_to_smt(program.postcondition, nondet=post_nondet)
    post_decls = prog_decls + post_nondet.declared
    post_text = _script(
        f"postcondition check for {program.name}",
        post_decls,
        f"(=> (and {INV_TOKEN} (not {guard_post})) {q_text})",
    )

    return SmtTemplate(
        name=program.name,
        variables=program.variables,
        init_text=init_text,
        inductive_text=inductive_text,
        post_text=post_text,
        declarations=_decl_block(prog_decls),
    )


# SMT-LIB simple-symbol characters; a variable occurrence is a maximal run of
# these, so substitution can never rewrite part of a longer identifier.
_SYM_CHARS = r"0-9a-zA-Z~!@$%^&*_\-+=<>.?/"


def prime_term(text: str, variables: tuple[str, ...]) -> str:
    """Token-aware substitution of primed symbols for program variables."""
    if not variables:
        return text
    names = sorted(variables, key=len, reverse=True)
    pattern = re.compile(
        f"(?<![{_SYM_CHARS}])({'|'.join(re.escape(n) for n in names)})(?![{_SYM_CHARS}])"
    )
    return pattern.sub(lambda m: primed(m.group(1)), text)


def splice(template: SmtTemplate, candidate: Invariant) -> VcBundle:
    """Textually substitute the candidate into all three scripts.

    No syntactic validation: malformed candidate text must reach the solver
    so that the resulting parse error can drive a repair round.
    """
    inv = candidate.smt_text
    inv_primed = prime_term(inv, template.variables)
    return VcBundle(
        init_script=template.init_text.replace(INV_TOKEN, inv),
        inductive_script=template.inductive_text.replace(INV_TOKEN, inv).replace(INV_PRIMED_TOKEN, inv_primed),
        post_script=template.post_text.replace(INV_TOKEN, inv),
        candidate=candidate,
    )


# ---------------------------------------------------------------------------
# Externally supplied templates
# ---------------------------------------------------------------------------

_DECLARE_RE = re.compile(
    r"\(\s*declare-(?:const\s+([^\s()]+)|fun\s+([^\s()]+)\s*\(\s*\))\s+(Int|Bool)\s*\)"
)


def _declared_ints(text: str) -> set[str]:
    out = set()
    for m in _DECLARE_RE.finditer(text):
        name = m.group(1) or m.group(2)
        if m.group(3) == "Int":
            out.add(name)
    return out


def load_external_template(init_text: str, inductive_text: str, post_text: str,
                           name: str = "external") -> SmtTemplate:
    """Wrap pre-built scripts (with @INV@/@INV_PRIMED@ tokens) as a template.

    Program variables are inferred as the declared Int constants whose
    `<v>!next` counterpart is also declared in the inductive script.
    """
    for label, text, tokens in (
        ("init", init_text, (INV_TOKEN,)),
        ("inductive", inductive_text, (INV_TOKEN, INV_PRIMED_TOKEN)),
        ("post", post_text, (INV_TOKEN,)),
    ):
        for token in tokens:
            if token not in text:
                raise ValueError(f"{label} template is missing the {token} placeholder")
    declared = _declared_ints(inductive_text)
    variables = tuple(sorted(v for v in declared if primed(v) in declared))
    return SmtTemplate(
        name=name,
        variables=variables,
        init_text=init_text,
        inductive_text=inductive_text,
        post_text=post_text,
        declarations="",
    )
