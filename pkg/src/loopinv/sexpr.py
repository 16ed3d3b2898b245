"""SMT-LIB s-expression parsing and ground evaluation.

Used to parse solver models, to evaluate script assertions under a concrete
model (counterexample soundness checks), and to locate balanced terms inside
free-form proposer responses.  Terms are plain nested lists; atoms are ints
(numerals) or strings (symbols / string literals).
"""

from __future__ import annotations

from typing import Any, Callable, Iterable, Mapping

Sexpr = Any  # int | str | list["Sexpr"]


class SexprError(ValueError):
    pass


class EvalError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SexprError("unterminated quoted symbol")
            tokens.append(text[i : j + 1])
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':  # escaped quote
                        j += 2
                        continue
                    break
                j += 1
            if j >= n:
                raise SexprError("unterminated string literal")
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n();"|':
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _atom(token: str) -> Sexpr:
    if token.lstrip("-").isdigit() and token not in ("-",):
        # SMT-LIB numerals are unsigned, but solvers never emit a bare "-5";
        # accepting it here costs nothing and helps hand-written tests.
        return int(token)
    return token


def parse_all(text: str) -> list[Sexpr]:
    """Parse every top-level s-expression in the text."""
    tokens = tokenize(text)
    out: list[Sexpr] = []
    stack: list[list[Sexpr]] = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise SexprError("unbalanced ')'")
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                out.append(done)
        else:
            atom = _atom(tok)
            if stack:
                stack[-1].append(atom)
            else:
                out.append(atom)
    if stack:
        raise SexprError("unbalanced '('")
    return out


def parse_one(text: str) -> Sexpr:
    exprs = parse_all(text)
    if len(exprs) != 1:
        raise SexprError(f"expected exactly one s-expression, found {len(exprs)}")
    return exprs[0]


def to_text(e: Sexpr) -> str:
    if isinstance(e, list):
        return "(" + " ".join(to_text(x) for x in e) + ")"
    if isinstance(e, int) and e < 0:
        return f"(- {-e})"
    return str(e)


def is_balanced(text: str) -> bool:
    try:
        parse_all(text)
        return True
    except SexprError:
        return False


def balanced_spans(text: str) -> list[tuple[int, int]]:
    """(start, end) of every top-level balanced parenthesized span."""
    spans: list[tuple[int, int]] = []
    depth = 0
    start = -1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c in ('"', "|"):
            close = text.find(c, i + 1)
            i = n if close < 0 else close + 1
            continue
        if c == "(":
            if depth == 0:
                start = i
            depth += 1
        elif c == ")":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    spans.append((start, i + 1))
        i += 1
    return spans


# ---------------------------------------------------------------------------
# Ground evaluation
# ---------------------------------------------------------------------------

def _euclidean_div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = a // b if b > 0 else -(a // -b)
    return q


def _euclidean_mod(a: int, b: int) -> int:
    return a - b * _euclidean_div(a, b)


def _chain(args: list, op: Callable[[Any, Any], bool]) -> bool:
    return all(op(a, b) for a, b in zip(args, args[1:]))


def evaluate(term: Sexpr, env: Mapping[str, Any]) -> Any:
    """Evaluate a ground SMT-LIB term under an assignment.

    env maps symbol names to ints or bools.  Supports the core boolean
    operators and integer arithmetic incl. div/mod/abs (Euclidean semantics)
    and let bindings; anything else raises EvalError.
    """
    if isinstance(term, bool):  # pragma: no cover - atoms are int/str
        return term
    if isinstance(term, int):
        return term
    if isinstance(term, str):
        if term == "true":
            return True
        if term == "false":
            return False
        name = term[1:-1] if term.startswith("|") and term.endswith("|") else term
        if name in env:
            return env[name]
        raise EvalError(f"unbound symbol {term!r}")
    if not isinstance(term, list) or not term:
        raise EvalError(f"cannot evaluate {term!r}")

    head = term[0]
    if isinstance(head, list):
        raise EvalError(f"cannot evaluate application of {to_text(head)}")
    args_raw = term[1:]

    if head == "let":
        if len(args_raw) != 2:
            raise EvalError("malformed let")
        bindings, body = args_raw
        new_env = dict(env)
        for b in bindings:
            if not (isinstance(b, list) and len(b) == 2 and isinstance(b[0], str)):
                raise EvalError("malformed let binding")
            new_env[b[0]] = evaluate(b[1], env)  # parallel let
        return evaluate(body, new_env)
    if head == "ite":
        if len(args_raw) != 3:
            raise EvalError("malformed ite")
        cond = evaluate(args_raw[0], env)
        _need_bool(cond, "ite condition")
        return evaluate(args_raw[1] if cond else args_raw[2], env)

    args = [evaluate(a, env) for a in args_raw]

    if head == "and":
        return all(_need_bool(a, "and") for a in args) if args else True
    if head == "or":
        return any(_need_bool(a, "or") for a in args) if args else False
    if head == "not":
        _expect_arity(args, 1, "not")
        return not _need_bool(args[0], "not")
    if head == "=>":
        if not args:
            raise EvalError("malformed =>")
        result = _need_bool(args[-1], "=>")
        for a in reversed(args[:-1]):  # right-associative
            result = (not _need_bool(a, "=>")) or result
        return result
    if head == "xor":
        acc = False
        for a in args:
            acc ^= _need_bool(a, "xor")
        return acc
    if head == "=":
        if len(args) < 2:
            raise EvalError("malformed =")
        return _chain(args, lambda a, b: a == b)
    if head == "distinct":
        vals = list(args)
        return all(vals[i] != vals[j] for i in range(len(vals)) for j in range(i + 1, len(vals)))
    if head in ("<", "<=", ">", ">="):
        ints = [_need_int(a, head) for a in args]
        ops = {"<": int.__lt__, "<=": int.__le__, ">": int.__gt__, ">=": int.__ge__}
        return _chain(ints, ops[head])
    if head == "+":
        return sum(_need_int(a, "+") for a in args)
    if head == "-":
        ints = [_need_int(a, "-") for a in args]
        if len(ints) == 1:
            return -ints[0]
        acc = ints[0]
        for v in ints[1:]:
            acc -= v
        return acc
    if head == "*":
        acc = 1
        for a in args:
            acc *= _need_int(a, "*")
        return acc
    if head == "div":
        ints = [_need_int(a, "div") for a in args]
        _expect_arity(ints, 2, "div")
        return _euclidean_div(ints[0], ints[1])
    if head == "mod":
        ints = [_need_int(a, "mod") for a in args]
        _expect_arity(ints, 2, "mod")
        return _euclidean_mod(ints[0], ints[1])
    if head == "abs":
        _expect_arity(args, 1, "abs")
        return abs(_need_int(args[0], "abs"))
    raise EvalError(f"unsupported operator {head!r}")


def _need_bool(v: Any, where: str) -> bool:
    if isinstance(v, bool):
        return v
    raise EvalError(f"expected a boolean in {where}, got {v!r}")


def _need_int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"expected an integer in {where}, got {v!r}")
    return v


def _expect_arity(args: Iterable, n: int, where: str) -> None:
    if len(list(args)) != n:
        raise EvalError(f"wrong arity for {where}")
