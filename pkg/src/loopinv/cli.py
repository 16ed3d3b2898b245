"""Command-line entry point.

Subcommands: parse, template, check, synth, bench.
Exit codes: 0 success/Solved, 1 verification failure/Exhausted, 2 usage
error, 3 environment error (solver or endpoint missing).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ast_nodes import Program
from .bench import emit_report, run_corpus
from .cfg import build_cfg, cfg_to_json
from .orchestrator import (
    SynthesisConfig, SynthesisStatus, synthesize, trace_to_dict, verify_only, write_trace,
)
from .parser import FrontendError, parse_program
from .proposers import ProposerError
from .smt import SolverConfig, SolverNotFound, VerdictKind
from .vcgen import Invariant, SmtTemplate, load_external_template, make_template

EXIT_OK = 0
EXIT_VERIFICATION_FAILURE = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3


def _add_common_flags(p: argparse.ArgumentParser, solver: bool = True) -> None:
    if solver:
        p.add_argument("--solver", default=None, help="solver executable (default: $LOOPINV_SOLVER or z3)")
        p.add_argument("--timeout-ms", type=int, default=5000, help="per-query solver timeout")
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    p.add_argument("--out", default=".", help="output directory for generated files")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loopinv",
                                     description="counterexample-guided loop-invariant synthesis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_parse = sub.add_parser("parse", help="parse a program and print it with its CFG JSON")
    p_parse.add_argument("source", help="input .c file")
    _add_common_flags(p_parse, solver=False)

    p_template = sub.add_parser("template", help="write the three placeholder SMT scripts")
    p_template.add_argument("source", help="input .c file")
    _add_common_flags(p_template, solver=False)

    p_check = sub.add_parser("check", help="verify one candidate invariant")
    p_check.add_argument("source", help="input .c file or template triple prefix")
    p_check.add_argument("--inv", required=True, help="candidate invariant (SMT-LIB term)")
    _add_common_flags(p_check)

    p_synth = sub.add_parser("synth", help="run the generate-and-check loop")
    p_synth.add_argument("source", help="input .c file or template triple prefix")
    p_synth.add_argument("--proposer", default="houdini",
                         help="llm | houdini | scripted:<file>")
    p_synth.add_argument("--max-iters", type=int, default=5)
    p_synth.add_argument("--endpoint", default="", help="chat-completions base URL (llm proposer)")
    p_synth.add_argument("--model", default="", help="model name for the llm proposer")
    p_synth.add_argument("--seed", type=int, default=0, help="random seed (enumerative tie-breaking)")
    _add_common_flags(p_synth)

    p_bench = sub.add_parser("bench", help="run a corpus and emit reports")
    p_bench.add_argument("corpus", help="corpus directory")
    p_bench.add_argument("--proposer", default="houdini")
    p_bench.add_argument("--max-iters", type=int, default=5)
    p_bench.add_argument("--endpoint", default="")
    p_bench.add_argument("--model", default="")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--parallel", type=int, default=1)
    _add_common_flags(p_bench)

    return parser


def _load_target(source: str):
    """A .c file, or a template triple referenced by its .init.smt2t member
    or bare prefix path."""
    path = Path(source)
    if path.suffix == ".c":
        return parse_program(path.read_text(), name=path.stem)
    name = path.name
    if name.endswith(".init.smt2t"):
        prefix = path.with_name(name[: -len(".init.smt2t")])
    else:
        prefix = path
    init_p = prefix.parent / f"{prefix.name}.init.smt2t"
    if init_p.exists():
        ind_p = prefix.parent / f"{prefix.name}.ind.smt2t"
        post_p = prefix.parent / f"{prefix.name}.post.smt2t"
        return load_external_template(
            init_p.read_text(), ind_p.read_text(), post_p.read_text(), name=prefix.name,
        )
    if path.exists():
        return parse_program(path.read_text(), name=path.stem)
    raise FileNotFoundError(f"input not found: {source}")


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    if args.solver:
        return SolverConfig(path=args.solver, timeout_ms=args.timeout_ms)
    return SolverConfig(path=_default_solver_path(), timeout_ms=args.timeout_ms)


def _default_solver_path() -> str:
    from .smt import find_default_solver

    return find_default_solver()


def cmd_parse(args: argparse.Namespace) -> int:
    program = _load_target(args.source)
    if not isinstance(program, Program):
        print("parse expects a .c input", file=sys.stderr)
        return EXIT_USAGE
    cfg = build_cfg(program)
    from .ast_nodes import program_to_source

    if args.json:
        doc = {
            "name": program.name,
            "variables": list(program.variables),
            "source": program_to_source(program),
            "cfg": json.loads(cfg_to_json(cfg)),
        }
        print(json.dumps(doc, indent=2))
    else:
        print(program_to_source(program), end="")
        print(cfg_to_json(cfg))
    return EXIT_OK


def cmd_template(args: argparse.Namespace) -> int:
    program = _load_target(args.source)
    if not isinstance(program, Program):
        print("template expects a .c input", file=sys.stderr)
        return EXIT_USAGE
    template = make_template(program)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for suffix, text in (
        ("init", template.init_text), ("ind", template.inductive_text), ("post", template.post_text),
    ):
        path = out / f"{program.name}.{suffix}.smt2t"
        path.write_text(text)
        paths[suffix] = str(path)
    if args.json:
        print(json.dumps({"written": paths}, indent=2))
    else:
        for p in paths.values():
            print(f"wrote {p}")
    return EXIT_OK


_VERDICT_LABELS = {
    VerdictKind.VALID: "Valid",
    VerdictKind.COUNTEREXAMPLE: "Counterexample",
    VerdictKind.PARSE_ERROR: "ParseError",
    VerdictKind.TIMEOUT: "Timeout",
    VerdictKind.SOLVER_FAILURE: "SolverFailure",
}


def cmd_check(args: argparse.Namespace) -> int:
    target = _load_target(args.source)
    config = SynthesisConfig(solver=_solver_config(args))
    verdicts = verify_only(target, Invariant(smt_text=args.inv), config)
    obligations = ("initialization", "inductiveness", "postcondition")
    if args.json:
        doc = {
            ob: {
                "verdict": v.kind.value,
                "model": dict(sorted(v.model.items())) if v.model else None,
                "message": v.message,
            }
            for ob, v in zip(obligations, verdicts)
        }
        print(json.dumps(doc, indent=2))
    else:
        for ob, v in zip(obligations, verdicts):
            print(f"{ob}: {v.describe()}")
    if any(v.kind is VerdictKind.SOLVER_FAILURE for v in verdicts):
        return EXIT_ENVIRONMENT
    return EXIT_OK if all(v.is_valid for v in verdicts) else EXIT_VERIFICATION_FAILURE


def cmd_synth(args: argparse.Namespace) -> int:
    target = _load_target(args.source)
    if args.proposer == "llm" and not args.endpoint:
        print("synth --proposer llm needs --endpoint", file=sys.stderr)
        return EXIT_ENVIRONMENT
    config = SynthesisConfig(
        max_iterations=args.max_iters,
        solver=_solver_config(args),
        proposer_id=args.proposer,
        random_seed=args.seed,
        endpoint=args.endpoint,
        model=args.model,
    )
    trace = synthesize(target, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{trace.program_name}.trace.json"
    template = target if isinstance(target, SmtTemplate) else make_template(target)
    write_trace(trace, trace_path, template)

    if args.json:
        print(json.dumps(trace_to_dict(trace), indent=2))
    else:
        print(f"status: {trace.status.value} after {trace.proposal_count} proposal(s)")
        if trace.winning_invariant is not None:
            print(f"invariant: {trace.winning_invariant.smt_text}")
        if trace.error:
            print(f"error: {trace.error}", file=sys.stderr)
        print(f"trace: {trace_path}")
    if trace.status is SynthesisStatus.SOLVED:
        return EXIT_OK
    if trace.status in (SynthesisStatus.PROPOSER_ERROR, SynthesisStatus.SOLVER_ERROR):
        return EXIT_ENVIRONMENT
    return EXIT_VERIFICATION_FAILURE


def cmd_bench(args: argparse.Namespace) -> int:
    config = SynthesisConfig(
        max_iterations=args.max_iters,
        solver=_solver_config(args),
        proposer_id=args.proposer,
        random_seed=args.seed,
        endpoint=args.endpoint,
        model=args.model,
    )
    report = run_corpus(args.corpus, config, parallelism=args.parallel, out_dir=args.out)
    if args.json:
        print(emit_report(report, "json"), end="")
    else:
        print(emit_report(report, "text-table"), end="")
    # success means every entry solved, or matched its pinned expected status
    return EXIT_OK if all(r.as_expected for r in report.rows) else EXIT_VERIFICATION_FAILURE


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; pass both through
        return int(exc.code or 0)

    handlers = {
        "parse": cmd_parse,
        "template": cmd_template,
        "check": cmd_check,
        "synth": cmd_synth,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except FrontendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverNotFound, ProposerError) as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
