"""AST for the restricted single-loop input language.

Expressions are immutable variant-tagged trees over mathematical (unbounded)
integers and booleans.  Statements are loop-free; the single loop lives on
``Program`` itself as guard + body.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class Expr:
    """Base class for expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    """Unary integer minus."""

    arg: Expr


@dataclass(frozen=True)
class Arith(Expr):
    """Binary integer arithmetic; op is one of ``+ - *``."""

    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Cmp(Expr):
    """Integer comparison; op is one of ``== != < <= > >=``."""

    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class And(Expr):
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Or(Expr):
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Implies(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Nondet(Expr):
    """Nondeterministic value marker (``unknown()``).

    sort is "int" when the marker stands for an integer (right-hand sides,
    arithmetic/comparison operands) and "bool" when it is used directly as a
    condition.
    """

    sort: str = "int"


ARITH_OPS = ("+", "-", "*")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


def is_boolean(e: Expr) -> bool:
    """True when the expression is boolean-sorted."""
    if isinstance(e, (BoolLit, Cmp, Not, And, Or, Implies)):
        return True
    if isinstance(e, Nondet):
        return e.sort == "bool"
    return False


def free_vars(e: Expr) -> set[str]:
    out: set[str] = set()
    for node in walk(e):
        if isinstance(node, Var):
            out.add(node.name)
    return out


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Neg):
        yield from walk(e.arg)
    elif isinstance(e, (Arith, Cmp)):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Not):
        yield from walk(e.arg)
    elif isinstance(e, (And, Or)):
        for a in e.args:
            yield from walk(a)
    elif isinstance(e, Implies):
        yield from walk(e.lhs)
        yield from walk(e.rhs)


def mentions(e: Expr, name: str) -> bool:
    return any(isinstance(n, Var) and n.name == name for n in walk(e))


def has_nondet(e: Expr) -> bool:
    return any(isinstance(n, Nondet) for n in walk(e))


# Smart constructors keep formulas flat and absorb trivial literals; they are
# used by derived-formula builders (preconditions, transition relations), not
# by the parser, so parsed programs round-trip structurally.

def conj(*parts: Expr) -> Expr:
    flat: list[Expr] = []
    for p in parts:
        if isinstance(p, BoolLit):
            if not p.value:
                return BoolLit(False)
            continue
        if isinstance(p, And):
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return BoolLit(True)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts: Expr) -> Expr:
    flat: list[Expr] = []
    for p in parts:
        if isinstance(p, BoolLit):
            if p.value:
                return BoolLit(True)
            continue
        if isinstance(p, Or):
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return BoolLit(False)
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def negate(e: Expr) -> Expr:
    if isinstance(e, BoolLit):
        return BoolLit(not e.value)
    if isinstance(e, Not):
        return e.arg
    return Not(e)


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------

class Stmt:
    """Base class for loop-free statement nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    value: Expr


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Stmt


@dataclass(frozen=True)
class Assume(Stmt):
    cond: Expr


@dataclass(frozen=True)
class Havoc(Stmt):
    var: str


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Seq(Stmt):
    stmts: tuple[Stmt, ...]


def seq(stmts: list[Stmt]) -> Stmt:
    """Normalise a statement list: drop skips, flatten nested sequences."""
    flat: list[Stmt] = []
    for s in stmts:
        if isinstance(s, Skip):
            continue
        if isinstance(s, Seq):
            flat.extend(s.stmts)
        else:
            flat.append(s)
    if not flat:
        return Skip()
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def stmt_list(s: Stmt) -> list[Stmt]:
    if isinstance(s, Seq):
        return list(s.stmts)
    if isinstance(s, Skip):
        return []
    return [s]


def stmt_vars(s: Stmt) -> set[str]:
    """All variable names read or written by a statement."""
    out: set[str] = set()
    if isinstance(s, Assign):
        out.add(s.var)
        out |= free_vars(s.value)
    elif isinstance(s, If):
        out |= free_vars(s.cond) | stmt_vars(s.then) | stmt_vars(s.orelse)
    elif isinstance(s, Assume):
        out |= free_vars(s.cond)
    elif isinstance(s, Havoc):
        out.add(s.var)
    elif isinstance(s, Seq):
        for sub in s.stmts:
            out |= stmt_vars(sub)
    return out


def assigned_vars(s: Stmt) -> set[str]:
    out: set[str] = set()
    if isinstance(s, (Assign, Havoc)):
        out.add(s.var)
    elif isinstance(s, If):
        out |= assigned_vars(s.then) | assigned_vars(s.orelse)
    elif isinstance(s, Seq):
        for sub in s.stmts:
            out |= assigned_vars(sub)
    return out


# ---------------------------------------------------------------------------
# Program
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Program:
    """A parsed single-loop program.

    ``prefix`` is the straight-line code before the loop, ``guard``/``body``
    the loop itself, ``postcondition`` the final assert.  All variables are
    integer-sorted mathematical integers.
    """

    name: str
    variables: tuple[str, ...]
    prefix: Stmt
    guard: Expr
    body: Stmt
    postcondition: Expr
    explicit_precondition: Optional[Expr] = None

    def validate(self) -> None:
        declared = set(self.variables)
        used = stmt_vars(self.prefix) | stmt_vars(self.body)
        used |= free_vars(self.guard) | free_vars(self.postcondition)
        if self.explicit_precondition is not None:
            used |= free_vars(self.explicit_precondition)
        undeclared = used - declared
        if undeclared:
            raise ValueError(f"undeclared variables: {sorted(undeclared)}")
        if not is_boolean(self.guard):
            raise ValueError("loop guard is not boolean")
        if not is_boolean(self.postcondition):
            raise ValueError("postcondition is not boolean")


# ---------------------------------------------------------------------------
# Pretty printing back to source form
# ---------------------------------------------------------------------------

_PREC = {"||": 1, "&&": 2, "cmp": 3, "+": 4, "-": 4, "*": 5, "unary": 6}


def expr_to_c(e: Expr, parent_prec: int = 0) -> str:
    def wrap(text: str, prec: int) -> str:
        return f"({text})" if prec < parent_prec else text

    if isinstance(e, IntLit):
        return str(e.value) if e.value >= 0 else wrap(str(e.value), _PREC["unary"])
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Nondet):
        return "unknown()"
    if isinstance(e, Neg):
        return wrap(f"-{expr_to_c(e.arg, _PREC['unary'] + 1)}", _PREC["unary"])
    if isinstance(e, Arith):
        p = _PREC[e.op]
        # Right operand gets a higher bound so `-`/`*` stay left-associative.
        return wrap(f"{expr_to_c(e.left, p)} {e.op} {expr_to_c(e.right, p + 1)}", p)
    if isinstance(e, Cmp):
        p = _PREC["cmp"]
        return wrap(f"{expr_to_c(e.left, p + 1)} {e.op} {expr_to_c(e.right, p + 1)}", p)
    if isinstance(e, Not):
        return wrap(f"!{expr_to_c(e.arg, _PREC['unary'] + 1)}", _PREC["unary"])
    if isinstance(e, And):
        p = _PREC["&&"]
        return wrap(" && ".join(expr_to_c(a, p + 1) for a in e.args), p)
    if isinstance(e, Or):
        p = _PREC["||"]
        return wrap(" || ".join(expr_to_c(a, p + 1) for a in e.args), p)
    if isinstance(e, Implies):
        # No implication in the surface grammar; print the equivalent form.
        return expr_to_c(disj(negate(e.lhs), e.rhs), parent_prec)
    raise TypeError(f"unknown expression node {e!r}")


def stmt_to_c(s: Stmt, indent: int = 0) -> str:
    pad = "    " * indent
    if isinstance(s, Assign):
        return f"{pad}{s.var} = {expr_to_c(s.value)};"
    if isinstance(s, Havoc):
        return f"{pad}{s.var} = unknown();"
    if isinstance(s, Assume):
        return f"{pad}assume({expr_to_c(s.cond)});"
    if isinstance(s, Skip):
        return f"{pad};"
    if isinstance(s, Seq):
        return "\n".join(stmt_to_c(sub, indent) for sub in s.stmts)
    if isinstance(s, If):
        lines = [f"{pad}if ({expr_to_c(s.cond)}) {{"]
        if not isinstance(s.then, Skip):
            lines.append(stmt_to_c(s.then, indent + 1))
        if isinstance(s.orelse, Skip):
            lines.append(f"{pad}}}")
        else:
            lines.append(f"{pad}}} else {{")
            lines.append(stmt_to_c(s.orelse, indent + 1))
            lines.append(f"{pad}}}")
        return "\n".join(lines)
    raise TypeError(f"unknown statement node {s!r}")


def program_to_source(p: Program) -> str:
    """Render a Program back to input-language text (reparseable)."""
    lines = [f"int {v};" for v in p.variables]
    if p.explicit_precondition is not None:
        lines.append(f"assume({expr_to_c(p.explicit_precondition)});")
    if not isinstance(p.prefix, Skip):
        lines.append(stmt_to_c(p.prefix))
    lines.append(f"while ({expr_to_c(p.guard)}) {{")
    if not isinstance(p.body, Skip):
        lines.append(stmt_to_c(p.body, 1))
    lines.append("}")
    lines.append(f"assert({expr_to_c(p.postcondition)});")
    return "\n".join(lines) + "\n"
