"""Parser for the single-loop C subset.

Accepted shape: `int` declarations (with optional initialisers), straight-line
prefix statements, exactly one `while` loop (or the equivalent canonical
`for`), and a final `assert(Q);`.  Leading `assume(...)` statements become the
explicit precondition.  `unknown()` is the nondeterministic value marker.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast_nodes import (
    And,
    Arith,
    Assign,
    Assume,
    BoolLit,
    Cmp,
    Expr,
    Havoc,
    If,
    IntLit,
    Neg,
    Nondet,
    Not,
    Or,
    Program,
    Skip,
    Stmt,
    Var,
    conj,
    free_vars,
    is_boolean,
    seq,
)


class FrontendError(Exception):
    """Base error for the frontend; carries source position when known."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f" at {line}:{col}" if line else ""
        super().__init__(f"{message}{where}")


class SourceSyntaxError(FrontendError):
    pass


class UnsupportedConstructError(FrontendError):
    pass


class UndeclaredVariableError(FrontendError):
    pass


_KEYWORDS = {
    "int", "while", "for", "if", "else", "true", "false",
    "assert", "assume", "unknown", "return", "void", "main",
}

_UNSUPPORTED_KEYWORDS = {
    "do", "break", "continue", "goto", "switch", "float", "double", "char",
    "struct", "long", "short", "unsigned",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\+\+|--|\+=|-=|&&|\|\||==|!=|<=|>=|->|[-+*<>=!;,(){}\[\].&])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'ident' | 'op' | 'eof'
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, col = 1, 1
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise SourceSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group()
        kind = m.lastgroup or ""
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, source: str, name: str):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.name = name
        self.variables: list[str] = []
        self.declared: set[str] = set()

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            raise SourceSyntaxError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def fail_unsupported(self, what: str, t: Token) -> None:
        raise UnsupportedConstructError(f"unsupported construct: {what}", t.line, t.col)

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        parts = [self.parse_and()]
        while self.accept("||"):
            parts.append(self.parse_and())
        if len(parts) == 1:
            return parts[0]
        return Or(tuple(parts))

    def parse_and(self) -> Expr:
        parts = [self.parse_cmp()]
        while self.accept("&&"):
            parts.append(self.parse_cmp())
        if len(parts) == 1:
            return parts[0]
        return And(tuple(parts))

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        t = self.peek()
        if t.text in ("==", "!=", "<", "<=", ">", ">="):
            self.next()
            right = self.parse_add()
            self._check_int_operand(left, t)
            self._check_int_operand(right, t)
            return Cmp(t.text, left, right)
        if t.text == "=":
            raise SourceSyntaxError("'=' is assignment; use '==' in conditions", t.line, t.col)
        return left

    def parse_add(self) -> Expr:
        left = self.parse_mul()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            right = self.parse_mul()
            self._check_int_operand(left, self.peek())
            self._check_int_operand(right, self.peek())
            left = Arith(op, left, right)
        return left

    def parse_mul(self) -> Expr:
        left = self.parse_unary()
        while self.at("*"):
            t = self.next()
            right = self.parse_unary()
            self._check_int_operand(left, t)
            self._check_int_operand(right, t)
            left = Arith("*", left, right)
        return left

    def parse_unary(self) -> Expr:
        t = self.peek()
        if t.text == "-":
            self.next()
            arg = self.parse_unary()
            self._check_int_operand(arg, t)
            if isinstance(arg, IntLit):
                return IntLit(-arg.value)
            return Neg(arg)
        if t.text == "!":
            self.next()
            arg = self.parse_unary()
            if not is_boolean(arg):
                raise SourceSyntaxError("'!' applied to a non-boolean expression", t.line, t.col)
            return Not(arg)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return IntLit(int(t.text))
        if t.text == "(":
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            if t.text == "true":
                self.next()
                return BoolLit(True)
            if t.text == "false":
                self.next()
                return BoolLit(False)
            if t.text == "unknown":
                self.next()
                self.expect("(")
                self.expect(")")
                return Nondet("int")  # re-sorted to bool in condition position
            if t.text in _UNSUPPORTED_KEYWORDS:
                self.fail_unsupported(f"keyword {t.text!r}", t)
            if self.peek(1).text == "(":
                self.fail_unsupported(f"function call {t.text!r}", t)
            self.next()
            if t.text not in self.declared:
                raise UndeclaredVariableError(f"undeclared variable {t.text!r}", t.line, t.col)
            return Var(t.text)
        raise SourceSyntaxError(f"expected an expression, found {t.text or 'end of input'!r}", t.line, t.col)

    def _check_int_operand(self, e: Expr, t: Token) -> None:
        if is_boolean(e):
            raise SourceSyntaxError("boolean expression used as an integer operand", t.line, t.col)

    def parse_condition(self) -> Expr:
        """Parse a boolean condition; a bare unknown() becomes a boolean havoc."""
        t = self.peek()
        e = self.parse_expr()
        e = _resort_condition(e)
        if not is_boolean(e):
            raise SourceSyntaxError("condition is not boolean", t.line, t.col)
        return e

    # -- statements ---------------------------------------------------------

    def parse_block_or_stmt(self) -> Stmt:
        if self.accept("{"):
            stmts: list[Stmt] = []
            while not self.accept("}"):
                stmts.append(self.parse_stmt())
            return seq(stmts)
        return self.parse_stmt()

    def parse_stmt(self) -> Stmt:
        t = self.peek()
        if t.text in ("*", "&"):
            self.fail_unsupported("pointers", t)
        if t.text in ("while", "for"):
            self.fail_unsupported("nested loop", t)
        if t.text == "assert":
            self.fail_unsupported("assert before the end of the program", t)
        if t.text == "int":
            self.fail_unsupported("declaration after the first statement", t)
        if t.text in _UNSUPPORTED_KEYWORDS or t.text in ("return", "void"):
            self.fail_unsupported(f"keyword {t.text!r}", t)
        if t.text == "if":
            self.next()
            self.expect("(")
            cond = self.parse_condition()
            self.expect(")")
            then = self.parse_block_or_stmt()
            orelse: Stmt = Skip()
            if self.accept("else"):
                orelse = self.parse_block_or_stmt()
            return If(cond, then, orelse)
        if t.text == "assume":
            self.next()
            self.expect("(")
            cond = self.parse_condition()
            self.expect(")")
            self.expect(";")
            return Assume(cond)
        if t.text == ";":
            self.next()
            return Skip()
        if t.kind == "ident":
            return self.parse_assignment()
        raise SourceSyntaxError(f"expected a statement, found {t.text!r}", t.line, t.col)

    def parse_assignment(self) -> Stmt:
        t = self.next()
        name = t.text
        if name in _KEYWORDS or name in _UNSUPPORTED_KEYWORDS:
            raise SourceSyntaxError(f"expected a statement, found {name!r}", t.line, t.col)
        if name not in self.declared:
            raise UndeclaredVariableError(f"undeclared variable {name!r}", t.line, t.col)
        op = self.peek()
        if op.text == "[":
            self.fail_unsupported("arrays", op)
        if op.text in (".", "->"):
            self.fail_unsupported("struct/pointer access", op)
        stmt = self._parse_assignment_tail(name, require_semi=True)
        return stmt

    def _parse_assignment_tail(self, name: str, require_semi: bool) -> Stmt:
        op = self.next()
        stmt: Stmt
        if op.text == "=":
            rhs = self.parse_expr()
            if is_boolean(rhs):
                raise SourceSyntaxError("boolean value assigned to an int variable", op.line, op.col)
            stmt = Havoc(name) if isinstance(rhs, Nondet) else Assign(name, rhs)
        elif op.text == "++":
            stmt = Assign(name, Arith("+", Var(name), IntLit(1)))
        elif op.text == "--":
            stmt = Assign(name, Arith("-", Var(name), IntLit(1)))
        elif op.text in ("+=", "-="):
            rhs = self.parse_expr()
            stmt = Assign(name, Arith(op.text[0], Var(name), rhs))
        else:
            raise SourceSyntaxError(f"expected an assignment operator, found {op.text!r}", op.line, op.col)
        if require_semi:
            self.expect(";")
        return stmt

    def parse_update_stmt(self) -> Stmt:
        """A `for` update clause: assignment without the trailing semicolon."""
        t = self.next()
        if t.kind != "ident" or t.text in _KEYWORDS:
            raise SourceSyntaxError("expected an update assignment", t.line, t.col)
        if t.text not in self.declared:
            raise UndeclaredVariableError(f"undeclared variable {t.text!r}", t.line, t.col)
        # `x++` may also be written prefix in the wild; only postfix accepted.
        return self._parse_assignment_tail(t.text, require_semi=False)

    # -- top level ----------------------------------------------------------

    def parse_declarations(self) -> list[Stmt]:
        inits: list[Stmt] = []
        while self.at("int"):
            # Reject `int main() {...}` style wrappers as unsupported functions.
            if self.peek(1).text == "main" or self.peek(2).text == "(":
                self.fail_unsupported("function definition", self.peek(1))
            self.next()
            while True:
                t = self.next()
                if t.text in ("*", "&"):
                    self.fail_unsupported("pointers", t)
                if t.kind != "ident" or t.text in _KEYWORDS:
                    raise SourceSyntaxError("expected a variable name", t.line, t.col)
                if self.peek().text == "[":
                    self.fail_unsupported("arrays", self.peek())
                if t.text in self.declared:
                    raise SourceSyntaxError(f"duplicate declaration of {t.text!r}", t.line, t.col)
                self.declared.add(t.text)
                self.variables.append(t.text)
                if self.at("="):
                    self.next()
                    rhs = self.parse_expr()
                    if is_boolean(rhs):
                        raise SourceSyntaxError("boolean initialiser for an int variable", t.line, t.col)
                    inits.append(Havoc(t.text) if isinstance(rhs, Nondet) else Assign(t.text, rhs))
                if self.accept(","):
                    continue
                self.expect(";")
                break
        return inits

    def parse_loop(self) -> tuple[Expr, Stmt]:
        t = self.next()
        if t.text == "while":
            self.expect("(")
            guard = self.parse_condition()
            self.expect(")")
            body = self.parse_block_or_stmt()
            return guard, body
        if t.text == "for":
            self.expect("(")
            init: Stmt = Skip()
            if not self.at(";"):
                tok = self.peek()
                if tok.kind != "ident" or tok.text in _KEYWORDS:
                    raise SourceSyntaxError("expected an init assignment", tok.line, tok.col)
                if tok.text not in self.declared:
                    raise UndeclaredVariableError(f"undeclared variable {tok.text!r}", tok.line, tok.col)
                self.next()
                init = self._parse_assignment_tail(tok.text, require_semi=False)
            self.expect(";")
            guard: Expr = BoolLit(True)
            if not self.at(";"):
                guard = self.parse_condition()
            self.expect(";")
            update: Stmt = Skip()
            if not self.at(")"):
                update = self.parse_update_stmt()
            self.expect(")")
            body = self.parse_block_or_stmt()
            self._pending_for_init = init
            return guard, seq([body, update])
        raise SourceSyntaxError(f"expected a loop, found {t.text!r}", t.line, t.col)

    _pending_for_init: Stmt = Skip()

    def parse_program(self) -> Program:
        self.parse_declarations_guard()
        inits = self.parse_declarations()
        if not self.variables:
            t = self.peek()
            raise SourceSyntaxError("no variable declarations found", t.line, t.col)

        pre_stmts: list[Stmt] = list(inits)
        while self.peek().text not in ("while", "for", "assert") and self.peek().kind != "eof":
            pre_stmts.append(self.parse_stmt())
        if self.peek().kind == "eof" or self.peek().text == "assert":
            t = self.peek()
            raise SourceSyntaxError("no loop found before the final assert", t.line, t.col)

        self._pending_for_init = Skip()
        guard, body = self.parse_loop()
        if not isinstance(self._pending_for_init, Skip):
            pre_stmts.append(self._pending_for_init)

        t = self.peek()
        if t.text in ("while", "for"):
            self.fail_unsupported("more than one loop", t)
        if t.text != "assert":
            raise SourceSyntaxError(f"expected assert(...) after the loop, found {t.text or 'end of input'!r}", t.line, t.col)
        self.next()
        self.expect("(")
        post = self.parse_condition()
        self.expect(")")
        self.expect(";")
        t = self.peek()
        if t.text in ("while", "for"):
            self.fail_unsupported("more than one loop", t)
        if t.kind != "eof":
            raise SourceSyntaxError(f"unexpected input after assert: {t.text!r}", t.line, t.col)

        # Leading assume(...) statements form the explicit precondition.
        explicit: Expr | None = None
        while pre_stmts and isinstance(pre_stmts[0], Assume):
            a = pre_stmts.pop(0)
            explicit = a.cond if explicit is None else conj(explicit, a.cond)

        program = Program(
            name=self.name,
            variables=tuple(self.variables),
            prefix=seq(pre_stmts),
            guard=guard,
            body=body,
            postcondition=post,
            explicit_precondition=explicit,
        )
        program.validate()
        return program

    def parse_declarations_guard(self) -> None:
        # Friendlier diagnostics for whole-file unsupported shapes.
        t = self.peek()
        if t.text in ("void", "return") or (t.text == "int" and self.peek(1).text == "main"):
            self.fail_unsupported("function definition", t)

    def parse_statements(self) -> Stmt:
        """Parse a bare statement sequence (used for CFG text round-trips)."""
        self.declared = _AllNames()
        stmts: list[Stmt] = []
        while self.peek().kind != "eof":
            stmts.append(self.parse_stmt())
        return seq(stmts)


class _AllNames(set):
    """Accept-everything variable set for syntactic (declaration-free) parses."""

    def __contains__(self, item: object) -> bool:  # noqa: D105
        return isinstance(item, str) and item not in _KEYWORDS


def _resort_condition(e: Expr) -> Expr:
    """In condition position a bare unknown() is a boolean havoc."""
    if isinstance(e, Nondet):
        return Nondet("bool")
    if isinstance(e, Not):
        return Not(_resort_condition(e.arg))
    if isinstance(e, And):
        return And(tuple(_resort_condition(a) for a in e.args))
    if isinstance(e, Or):
        return Or(tuple(_resort_condition(a) for a in e.args))
    return e


def parse_program(source_text: str, name: str = "program") -> Program:
    """Parse input-language text into a Program.

    Raises SourceSyntaxError / UnsupportedConstructError /
    UndeclaredVariableError with source positions.
    """
    return _Parser(source_text, name).parse_program()


def parse_statements(text: str) -> Stmt:
    """Parse a statement sequence without declaration checking."""
    return _Parser(text, "fragment").parse_statements()


def parse_condition_text(text: str) -> Expr:
    """Parse a condition without declaration checking (CFG round-trips)."""
    p = _Parser(text, "fragment")
    p.declared = _AllNames()
    e = p.parse_condition()
    t = p.peek()
    if t.kind != "eof":
        raise SourceSyntaxError(f"unexpected input after condition: {t.text!r}", t.line, t.col)
    return e
