"""External SMT solver integration.

Each check writes the script to a temporary .smt2 file and runs
`<solver> <file>` as a one-shot subprocess, so any SMT-LIB-compliant solver
binary works (Z3 is the reference).  The timeout is enforced host-side by
killing the process; peak RSS of the subprocess is sampled while it runs.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import psutil

from . import sexpr

SOLVER_ENV_VAR = "LOOPINV_SOLVER"
_RSS_POLL_SECONDS = 0.005


class SolverNotFound(Exception):
    pass


class ModelParseError(Exception):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """How to run the solver; timeout is per query, in milliseconds."""

    path: str
    timeout_ms: int = 5000
    extra_args: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")

    @classmethod
    def default(cls, timeout_ms: int = 5000) -> "SolverConfig":
        return cls(path=find_default_solver(), timeout_ms=timeout_ms)

    def resolve_path(self) -> str:
        found = shutil.which(self.path)
        if found is None:
            raise SolverNotFound(f"solver executable not found: {self.path!r}")
        return found


def find_default_solver() -> str:
    """LOOPINV_SOLVER if set, otherwise `z3` from PATH."""
    env = os.environ.get(SOLVER_ENV_VAR)
    if env:
        return env
    if shutil.which("z3"):
        return "z3"
    raise SolverNotFound(
        f"no SMT solver configured: set {SOLVER_ENV_VAR} or put z3 on PATH"
    )


class VerdictKind(Enum):
    VALID = "valid"
    COUNTEREXAMPLE = "counterexample"
    PARSE_ERROR = "parse-error"
    TIMEOUT = "timeout"
    SOLVER_FAILURE = "solver-failure"


class ModelValues(dict):
    """Model assignment; `defaulted` names variables the solver omitted
    (assigned 0 here)."""

    def __init__(self, values: dict[str, int], defaulted: Iterable[str] = ()):
        super().__init__(values)
        self.defaulted = frozenset(defaulted)


@dataclass(frozen=True)
class CheckVerdict:
    """Outcome of one solver run; exactly one of the five kinds.

    time_ms and memory_mb are measurements of the run that produced the
    verdict (memory is the peak RSS observed for the solver subprocess).
    """

    kind: VerdictKind
    model: Optional[ModelValues] = None
    message: str = ""
    exit_status: Optional[int] = None
    time_ms: float = 0.0
    memory_mb: float = 0.0

    @property
    def is_valid(self) -> bool:
        return self.kind is VerdictKind.VALID

    def describe(self) -> str:
        if self.kind is VerdictKind.VALID:
            return "Valid"
        if self.kind is VerdictKind.COUNTEREXAMPLE:
            inside = ", ".join(f"{k}={v}" for k, v in sorted((self.model or {}).items()))
            return f"Counterexample {{{inside}}}"
        if self.kind is VerdictKind.PARSE_ERROR:
            return f"ParseError: {self.message}"
        if self.kind is VerdictKind.TIMEOUT:
            return "Timeout"
        return f"SolverFailure: {self.message}"


def parse_model(solver_output: str, expected_vars: Iterable[str]) -> ModelValues:
    """Extract integer values from (get-model) output.

    Accepts both `(model (define-fun ...))` and the bare paren-list form;
    negative literals are written `(- k)`.  Booleans come back as 0/1.
    Expected variables missing from the model default to 0 and are flagged.
    """
    try:
        forms = sexpr.parse_all(solver_output)
    except sexpr.SexprError as exc:
        raise ModelParseError(f"unreadable model output: {exc}") from exc

    defines: list = []
    for form in forms:
        if not isinstance(form, list):
            continue
        if form and form[0] == "model":
            defines.extend(f for f in form[1:] if isinstance(f, list))
        elif form and form[0] == "define-fun":
            defines.append(form)
        else:
            defines.extend(f for f in form if isinstance(f, list) and f and f[0] == "define-fun")

    values: dict[str, int] = {}
    for d in defines:
        if len(d) != 5 or d[0] != "define-fun":
            continue
        _, name, params, sort, body = d
        if params != [] or sort not in ("Int", "Bool"):
            continue
        if not isinstance(name, str):
            continue
        if name.startswith("|") and name.endswith("|"):
            name = name[1:-1]
        try:
            value = sexpr.evaluate(body, {})
        except sexpr.EvalError as exc:
            raise ModelParseError(f"non-constant model value for {name}: {exc}") from exc
        values[name] = int(value)

    defaulted = [v for v in expected_vars if v not in values]
    for v in defaulted:
        values[v] = 0
    return ModelValues(values, defaulted)


def _first_error_line(text: str) -> Optional[str]:
    lines = [ln.strip() for ln in text.splitlines()]
    errors = [ln for ln in lines if ln.startswith("(error")]
    if errors:
        return "\n".join(errors)
    return None


@dataclass
class _RssSampler:
    pid: int
    peak: int = 0
    _stop: threading.Event = field(default_factory=threading.Event)

    def run(self) -> None:
        try:
            proc = psutil.Process(self.pid)
            while not self._stop.is_set():
                try:
                    rss = proc.memory_info().rss
                except (psutil.NoSuchProcess, psutil.ZombieProcess):
                    return
                if rss > self.peak:
                    self.peak = rss
                self._stop.wait(_RSS_POLL_SECONDS)
        except Exception:
            return

    def stop(self) -> None:
        self._stop.set()


def check_script(script: str, config: SolverConfig) -> CheckVerdict:
    """Run one script through the solver and classify the outcome.

    unsat -> Valid; sat -> Counterexample with the parsed model; an
    `(error ...)` before any answer -> ParseError with the verbatim message;
    host-side timeout -> Timeout (the process is killed); anything else ->
    SolverFailure.
    """
    try:
        exe = config.resolve_path()
    except SolverNotFound as exc:
        return CheckVerdict(VerdictKind.SOLVER_FAILURE, message=str(exc))

    expected = _declared_symbols(script)
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as handle:
        handle.write(script)
        path = handle.name

    start = time.monotonic()
    peak_mb = 0.0
    try:
        try:
            proc = subprocess.Popen(
                [exe, *config.extra_args, path],
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,  # lets the timeout kill the whole group
            )
        except OSError as exc:
            return CheckVerdict(VerdictKind.SOLVER_FAILURE, message=f"cannot start solver: {exc}")

        sampler = _RssSampler(proc.pid)
        thread = threading.Thread(target=sampler.run, daemon=True)
        thread.start()
        timed_out = False
        try:
            stdout, stderr = proc.communicate(timeout=config.timeout_ms / 1000.0)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_group(proc)
            try:
                stdout, stderr = proc.communicate(timeout=1.0)
            except subprocess.TimeoutExpired:  # pragma: no cover - kill is forceful
                stdout, stderr = "", ""
        finally:
            sampler.stop()
            thread.join(timeout=1.0)
            peak_mb = sampler.peak / (1024 * 1024)

        elapsed_ms = (time.monotonic() - start) * 1000.0
        if timed_out:
            return CheckVerdict(VerdictKind.TIMEOUT, time_ms=elapsed_ms, memory_mb=peak_mb)
        return _classify(stdout, stderr, proc.returncode, expected, elapsed_ms, peak_mb)
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass


def _kill_group(proc: subprocess.Popen) -> None:
    import signal

    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        proc.kill()


def _classify(stdout: str, stderr: str, returncode: int,
              expected_vars: list[str], elapsed_ms: float, peak_mb: float) -> CheckVerdict:
    answer = None  # first decisive token
    rest_lines: list[str] = []
    for idx, raw in enumerate(stdout.splitlines()):
        line = raw.strip()
        if line in ("sat", "unsat", "unknown"):
            answer = line
            rest_lines = stdout.splitlines()[idx + 1 :]
            break
        if line.startswith("(error"):
            answer = "error"
            break

    if answer == "unsat":
        return CheckVerdict(VerdictKind.VALID, time_ms=elapsed_ms, memory_mb=peak_mb)
    if answer == "sat":
        try:
            model = parse_model("\n".join(rest_lines), expected_vars)
        except ModelParseError as exc:
            return CheckVerdict(
                VerdictKind.SOLVER_FAILURE, message=str(exc),
                exit_status=returncode, time_ms=elapsed_ms, memory_mb=peak_mb,
            )
        return CheckVerdict(
            VerdictKind.COUNTEREXAMPLE, model=model,
            time_ms=elapsed_ms, memory_mb=peak_mb,
        )
    if answer == "error":
        message = _first_error_line(stdout) or ""
        return CheckVerdict(
            VerdictKind.PARSE_ERROR, message=message,
            exit_status=returncode, time_ms=elapsed_ms, memory_mb=peak_mb,
        )
    stderr_error = _first_error_line(stderr)
    if stderr_error:
        return CheckVerdict(
            VerdictKind.PARSE_ERROR, message=stderr_error,
            exit_status=returncode, time_ms=elapsed_ms, memory_mb=peak_mb,
        )
    if answer == "unknown":
        message = "solver returned unknown"
    else:
        detail = (stderr.strip() or stdout.strip())[:500]
        message = f"no sat/unsat answer (exit status {returncode})" + (f": {detail}" if detail else "")
    return CheckVerdict(
        VerdictKind.SOLVER_FAILURE, message=message,
        exit_status=returncode, time_ms=elapsed_ms, memory_mb=peak_mb,
    )


_DECL_SYMBOL_RE = re.compile(
    r"\(\s*declare-(?:const\s+([^\s()]+)|fun\s+([^\s()]+)\s*\(\s*\))\s*([A-Za-z]+)?"
)


def _declared_symbols(script: str) -> list[str]:
    """Symbols declared in the script, in declaration order."""
    return [m.group(1) or m.group(2) for m in _DECL_SYMBOL_RE.finditer(script)]


def declared_sorts(script: str) -> dict[str, str]:
    """Symbol -> sort for the script's zero-ary declarations."""
    out: dict[str, str] = {}
    for m in _DECL_SYMBOL_RE.finditer(script):
        out[m.group(1) or m.group(2)] = m.group(3) or "Int"
    return out


def typed_model_env(model: ModelValues, script: str) -> dict[str, object]:
    """Model values coerced to the script's sorts (Bool entries become bools),
    for ground evaluation of the script's assertion."""
    sorts = declared_sorts(script)
    return {
        name: bool(value) if sorts.get(name) == "Bool" else value
        for name, value in model.items()
    }
