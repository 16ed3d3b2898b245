"""loopinv: counterexample-guided loop-invariant synthesis.

Parses single-loop programs, reduces candidate invariants to three negated
SMT-LIB implications, and drives a generate-check-repair loop between a
pluggable proposer (LLM endpoint, enumerative baseline, scripted replay) and
an external SMT solver.
"""

from .ast_nodes import Expr, Program, Stmt, program_to_source
from .cfg import Cfg, build_cfg, cfg_from_json, cfg_to_json
from .houdini import HoudiniProposer, houdini_synthesize
from .orchestrator import (
    SynthesisConfig,
    SynthesisStatus,
    SynthesisTrace,
    synthesize,
    verify_only,
)
from .parser import (
    FrontendError,
    SourceSyntaxError,
    UndeclaredVariableError,
    UnsupportedConstructError,
    parse_program,
)
from .proposers import (
    Feedback,
    LlmProposer,
    Proposal,
    ProposalContext,
    ProposerError,
    ScriptedProposer,
    extract_invariant,
)
from .smt import CheckVerdict, SolverConfig, VerdictKind, check_script, parse_model
from .vcgen import (
    Invariant,
    SmtTemplate,
    TransitionRelation,
    VcBundle,
    derive_precondition,
    encode_body,
    load_external_template,
    make_template,
    splice,
)
from .bench import BenchReport, CorpusEntry, emit_report, run_corpus

__version__ = "0.1.0"

__all__ = [
    "BenchReport",
    "Cfg",
    "CheckVerdict",
    "CorpusEntry",
    "Expr",
    "Feedback",
    "FrontendError",
    "HoudiniProposer",
    "Invariant",
    "LlmProposer",
    "Program",
    "Proposal",
    "ProposalContext",
    "ProposerError",
    "ScriptedProposer",
    "SmtTemplate",
    "SolverConfig",
    "SourceSyntaxError",
    "Stmt",
    "SynthesisConfig",
    "SynthesisStatus",
    "SynthesisTrace",
    "TransitionRelation",
    "UndeclaredVariableError",
    "UnsupportedConstructError",
    "VcBundle",
    "VerdictKind",
    "build_cfg",
    "cfg_from_json",
    "cfg_to_json",
    "check_script",
    "derive_precondition",
    "emit_report",
    "encode_body",
    "extract_invariant",
    "houdini_synthesize",
    "load_external_template",
    "make_template",
    "parse_model",
    "parse_program",
    "program_to_source",
    "run_corpus",
    "splice",
    "synthesize",
    "verify_only",
]
