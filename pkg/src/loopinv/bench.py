"""Corpus runner and report emitters.

A corpus directory holds `.c` programs and/or external template triples
(`<id>.init.smt2t`, `<id>.ind.smt2t`, `<id>.post.smt2t`), with an optional
`corpus.json` manifest pinning expected statuses:

    {"entries": [{"id": "count_up", "expected_status": "solved"}, ...]}

Reports aggregate the three run metrics (wall-clock time, proposal count,
solver memory) and a solved-at-iteration-k histogram.  Conventions: mean time
and mean memory are over all attempted entries, mean iterations over solved
entries only; the text report header restates this.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .orchestrator import SynthesisConfig, SynthesisStatus, synthesize, write_trace
from .parser import FrontendError, parse_program
from .vcgen import load_external_template


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    kind: str  # 'c' | 'template'
    paths: tuple[Path, ...]
    expected_status: Optional[str] = None


@dataclass
class EntryRow:
    id: str
    status: str
    iterations: int
    wall_clock_ms: float
    solver_memory_mb: float
    invariant: Optional[str] = None
    error: str = ""
    expected_status: Optional[str] = None

    @property
    def as_expected(self) -> bool:
        """Solved, or pinned to an expected status that matched."""
        if self.status == SynthesisStatus.SOLVED.value:
            return True
        return self.expected_status is not None and self.status == self.expected_status


@dataclass
class BenchReport:
    method: str
    rows: list[EntryRow]
    max_iterations: int

    @property
    def attempted(self) -> int:
        return len(self.rows)

    @property
    def solved_count(self) -> int:
        return sum(1 for r in self.rows if r.status == SynthesisStatus.SOLVED.value)

    @property
    def mean_time_ms(self) -> float:
        if not self.rows:
            return 0.0
        return sum(r.wall_clock_ms for r in self.rows) / len(self.rows)

    @property
    def mean_iterations(self) -> float:
        solved = [r for r in self.rows if r.status == SynthesisStatus.SOLVED.value]
        if not solved:
            return 0.0
        return sum(r.iterations for r in solved) / len(solved)

    @property
    def mean_memory_mb(self) -> float:
        if not self.rows:
            return 0.0
        return sum(r.solver_memory_mb for r in self.rows) / len(self.rows)

    @property
    def iteration_histogram(self) -> list[int]:
        hist = [0] * self.max_iterations
        for r in self.rows:
            if r.status == SynthesisStatus.SOLVED.value and 1 <= r.iterations <= self.max_iterations:
                hist[r.iterations - 1] += 1
        return hist


def load_corpus(corpus_dir: str | Path) -> list[CorpusEntry]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")

    expected: dict[str, str] = {}
    manifest = root / "corpus.json"
    if manifest.exists():
        doc = json.loads(manifest.read_text())
        for item in doc.get("entries", []):
            expected[item["id"]] = item.get("expected_status")

    entries: list[CorpusEntry] = []
    seen: set[str] = set()
    for path in sorted(root.glob("*.c")):
        entry_id = path.stem
        entries.append(CorpusEntry(entry_id, "c", (path,), expected.get(entry_id)))
        seen.add(entry_id)
    for init_path in sorted(root.glob("*.init.smt2t")):
        entry_id = init_path.name[: -len(".init.smt2t")]
        ind_path = root / f"{entry_id}.ind.smt2t"
        post_path = root / f"{entry_id}.post.smt2t"
        if not (ind_path.exists() and post_path.exists()):
            raise FileNotFoundError(f"incomplete template triple for {entry_id!r}")
        if entry_id in seen:
            raise ValueError(f"duplicate corpus id {entry_id!r}")
        entries.append(CorpusEntry(
            entry_id, "template", (init_path, ind_path, post_path), expected.get(entry_id),
        ))
        seen.add(entry_id)
    if not entries:
        raise FileNotFoundError(f"no corpus entries in {root}")
    return entries


def load_entry_target(entry: CorpusEntry):
    if entry.kind == "c":
        return parse_program(entry.paths[0].read_text(), name=entry.id)
    init_text, ind_text, post_text = (p.read_text() for p in entry.paths)
    return load_external_template(init_text, ind_text, post_text, name=entry.id)


def _run_entry(entry: CorpusEntry, config: SynthesisConfig,
               out_dir: Optional[Path]) -> EntryRow:
    try:
        target = load_entry_target(entry)
    except (FrontendError, ValueError, OSError) as exc:
        return EntryRow(
            id=entry.id, status="load-error", iterations=0,
            wall_clock_ms=0.0, solver_memory_mb=0.0, error=str(exc),
            expected_status=entry.expected_status,
        )
    trace = synthesize(target, config)
    if out_dir is not None:
        traces_dir = out_dir / "traces"
        traces_dir.mkdir(parents=True, exist_ok=True)
        write_trace(trace, traces_dir / f"{entry.id}.json")
    return EntryRow(
        id=entry.id,
        status=trace.status.value,
        iterations=trace.proposal_count,
        wall_clock_ms=trace.wall_clock_ms,
        solver_memory_mb=trace.peak_solver_memory_mb,
        invariant=trace.winning_invariant.smt_text if trace.winning_invariant else None,
        error=trace.error,
        expected_status=entry.expected_status,
    )


def run_corpus(corpus_dir: str | Path, config: SynthesisConfig,
               parallelism: int = 1, out_dir: Optional[str | Path] = None) -> BenchReport:
    """Run every corpus entry; per-entry failures become rows, never aborts."""
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    entries = load_corpus(corpus_dir)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    solver = config.solver_config()
    method = f"{config.proposer_id} + {Path(solver.path).name}"

    if parallelism == 1:
        rows = [_run_entry(e, config, out_path) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(lambda e: _run_entry(e, config, out_path), entries))

    report = BenchReport(method=method, rows=rows, max_iterations=config.max_iterations)
    if out_path is not None:
        (out_path / "report.txt").write_text(emit_report(report, "text-table"))
        (out_path / "report.json").write_text(emit_report(report, "json"))
        (out_path / "report.csv").write_text(emit_report(report, "csv"))
    return report


# ---------------------------------------------------------------------------
# Emitters
# ---------------------------------------------------------------------------

REPORT_FORMATS = ("text-table", "json", "csv")


def emit_report(report: BenchReport, fmt: str = "text-table") -> str:
    if fmt == "json":
        return _emit_json(report)
    if fmt == "csv":
        return _emit_csv(report)
    if fmt == "text-table":
        return _emit_text(report)
    raise ValueError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")


def _emit_text(report: BenchReport) -> str:
    lines = [
        "Benchmark report",
        "(mean time/memory over all attempted entries; mean iterations over solved entries)",
        "",
        "Method | Solved | Time (s) | Iters | Memory (MB)",
        "------ | ------ | -------- | ----- | -----------",
        "{m} | {solved}/{total} | {time:.2f} | {iters:.2f} | {mem:.3f}".format(
            m=report.method,
            solved=report.solved_count,
            total=report.attempted,
            time=report.mean_time_ms / 1000.0,
            iters=report.mean_iterations,
            mem=report.mean_memory_mb,
        ),
        "",
        "Solved vs. iteration count",
        " | ".join(f"Iter {k}" for k in range(1, report.max_iterations + 1)),
        " | ".join(str(n) for n in report.iteration_histogram),
        "",
        "Entries",
        "id | status | iters | time (s) | memory (MB)",
    ]
    for r in report.rows:
        lines.append(
            f"{r.id} | {r.status} | {r.iterations} | "
            f"{r.wall_clock_ms / 1000.0:.2f} | {r.solver_memory_mb:.3f}"
        )
    return "\n".join(lines) + "\n"


def _emit_json(report: BenchReport) -> str:
    doc = {
        "method": report.method,
        "max_iterations": report.max_iterations,
        "aggregates": {
            "attempted": report.attempted,
            "solved": report.solved_count,
            "mean_time_ms": report.mean_time_ms,
            "mean_iterations": report.mean_iterations,
            "mean_memory_mb": report.mean_memory_mb,
        },
        "iteration_histogram": report.iteration_histogram,
        "entries": [
            {
                "id": r.id,
                "status": r.status,
                "iterations": r.iterations,
                "wall_clock_ms": r.wall_clock_ms,
                "solver_memory_mb": r.solver_memory_mb,
                "invariant": r.invariant,
                "error": r.error,
                "expected_status": r.expected_status,
            }
            for r in report.rows
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def report_from_json(text: str) -> BenchReport:
    doc = json.loads(text)
    rows = [
        EntryRow(
            id=e["id"],
            status=e["status"],
            iterations=e["iterations"],
            wall_clock_ms=e["wall_clock_ms"],
            solver_memory_mb=e["solver_memory_mb"],
            invariant=e.get("invariant"),
            error=e.get("error", ""),
            expected_status=e.get("expected_status"),
        )
        for e in doc["entries"]
    ]
    return BenchReport(method=doc["method"], rows=rows, max_iterations=doc["max_iterations"])


def _emit_csv(report: BenchReport) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "status", "iterations", "wall_clock_ms", "solver_memory_mb", "invariant"])
    for r in report.rows:
        writer.writerow([r.id, r.status, r.iterations,
                         f"{r.wall_clock_ms:.3f}", f"{r.solver_memory_mb:.3f}",
                         r.invariant or ""])
    return buf.getvalue()
