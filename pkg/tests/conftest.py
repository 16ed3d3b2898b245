from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from loopinv.smt import SolverConfig

CORPUS_DIR = Path(__file__).resolve().parent.parent / "src" / "loopinv" / "corpus"


def _pick_solver() -> tuple[str, int]:
    """Use $LOOPINV_SOLVER when set, else z3 from PATH; skip without one."""
    import os

    env = os.environ.get("LOOPINV_SOLVER")
    if env and shutil.which(env):
        # non-native builds can be slow; keep a generous per-query budget
        return env, 30000
    if shutil.which("z3"):
        return "z3", 5000
    pytest.skip("no SMT solver available (set LOOPINV_SOLVER or install z3)")


@pytest.fixture(scope="session")
def solver_config() -> SolverConfig:
    path, timeout = _pick_solver()
    return SolverConfig(path=path, timeout_ms=timeout)


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    assert CORPUS_DIR.is_dir()
    return CORPUS_DIR


def load_corpus_source(name: str) -> str:
    return (CORPUS_DIR / f"{name}.c").read_text()


@pytest.fixture()
def bench122_program():
    from loopinv.parser import parse_program

    return parse_program(load_corpus_source("bench122"), name="bench122")
