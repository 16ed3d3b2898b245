from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from loopinv.cli import main

from conftest import load_corpus_source

REPAIRED_122 = "(and (>= i 1) (= sn (- i 1)) (<= i (+ size 1)))"
WEAK_122 = "(= sn (- i 1))"


@pytest.fixture()
def bench122_file(tmp_path):
    path = tmp_path / "bench122.c"
    path.write_text(load_corpus_source("bench122"))
    return path


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_help_exits_zero(capsys):
    assert run_cli("synth", "--help") == 0
    assert "proposer" in capsys.readouterr().out


def test_usage_error_exit_code(capsys):
    assert run_cli("frobnicate") == 2
    assert run_cli("check", "missing.c", "--inv", "true") == 2


def test_parse_prints_program_and_cfg(bench122_file, capsys):
    assert run_cli("parse", bench122_file) == 0
    out = capsys.readouterr().out
    assert "while (i <= size)" in out
    assert '"loop-head"' in out


def test_parse_json_output_is_pure_json(bench122_file, capsys):
    assert run_cli("parse", bench122_file, "--json") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["name"] == "bench122"
    assert {n["kind"] for n in doc["cfg"]["nodes"]} >= {"entry", "loop-head", "exit"}


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.c"
    bad.write_text("int x; x = ;")
    assert run_cli("parse", bad) == 2
    assert "error" in capsys.readouterr().err


def test_template_writes_three_scripts(bench122_file, tmp_path, capsys):
    out = tmp_path / "templates"
    assert run_cli("template", bench122_file, "--out", out) == 0
    for suffix in ("init", "ind", "post"):
        text = (out / f"bench122.{suffix}.smt2t").read_text()
        assert "@INV@" in text
    assert "@INV_PRIMED@" in (out / "bench122.ind.smt2t").read_text()


def test_check_valid_invariant_exit_zero(bench122_file, solver_config, capsys):
    code = run_cli("check", bench122_file, "--inv", REPAIRED_122,
                   "--solver", solver_config.path)
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("Valid") == 3


def test_check_weak_invariant_exit_one_with_model(bench122_file, solver_config, capsys):
    code = run_cli("check", bench122_file, "--inv", WEAK_122,
                   "--solver", solver_config.path)
    out = capsys.readouterr().out
    assert code == 1
    assert "postcondition: Counterexample" in out


def test_check_json_mode(bench122_file, solver_config, capsys):
    code = run_cli("check", bench122_file, "--inv", WEAK_122,
                   "--solver", solver_config.path, "--json")
    doc = json.loads(capsys.readouterr().out)
    assert code == 1
    assert doc["initialization"]["verdict"] == "valid"
    assert doc["postcondition"]["verdict"] == "counterexample"
    assert doc["postcondition"]["model"]


def test_check_missing_solver_exit_three(bench122_file, capsys):
    code = run_cli("check", bench122_file, "--inv", "true",
                   "--solver", "/no/such/solver")
    assert code == 3


def test_synth_scripted_writes_trace(bench122_file, tmp_path, solver_config, capsys):
    cands = tmp_path / "cands.json"
    cands.write_text(json.dumps([WEAK_122, REPAIRED_122]))
    out = tmp_path / "out"
    code = run_cli("synth", bench122_file, "--proposer", f"scripted:{cands}",
                   "--solver", solver_config.path, "--out", out)
    assert code == 0
    trace = json.loads((out / "bench122.trace.json").read_text())
    assert trace["status"] == "solved"
    assert trace["totals"]["proposals"] == 2
    assert trace["iterations"][0]["checks"][-1]["verdict"] == "counterexample"


def test_synth_exhausted_exit_one(bench122_file, tmp_path, solver_config):
    cands = tmp_path / "cands.json"
    cands.write_text(json.dumps([WEAK_122]))
    code = run_cli("synth", bench122_file, "--proposer", f"scripted:{cands}",
                   "--solver", solver_config.path, "--max-iters", "2",
                   "--out", tmp_path / "out")
    assert code == 1


def test_synth_houdini(bench122_file, tmp_path, solver_config, capsys):
    code = run_cli("synth", bench122_file, "--proposer", "houdini",
                   "--solver", solver_config.path, "--out", tmp_path / "out", "--json")
    doc = json.loads(capsys.readouterr().out)
    assert code == 0
    assert doc["status"] == "solved"


def test_synth_llm_without_endpoint_exit_three(bench122_file, tmp_path):
    assert run_cli("synth", bench122_file, "--proposer", "llm",
                   "--out", tmp_path / "out") == 3


def test_bench_corpus(tmp_path, solver_config, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for name in ("count_up", "count_down"):
        (corpus / f"{name}.c").write_text(load_corpus_source(name))
    out = tmp_path / "out"
    code = run_cli("bench", corpus, "--proposer", "houdini",
                   "--solver", solver_config.path, "--out", out, "--parallel", "2")
    assert code == 0
    text = capsys.readouterr().out
    assert "Solved" in text and "Iters" in text
    assert (out / "report.json").exists()
    assert (out / "traces" / "count_up.json").exists()


# ---------------------------------------------------------------------------
# mocked chat endpoint (no external network)
# ---------------------------------------------------------------------------

class _ChatHandler(BaseHTTPRequestHandler):
    responses: list[str] = []
    requests: list[dict] = []

    def do_POST(self):  # noqa: N802 (http.server API)
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).requests.append({"path": self.path, "body": body})
        index = min(len(type(self).requests) - 1, len(type(self).responses) - 1)
        payload = json.dumps({
            "choices": [{"message": {"content": type(self).responses[index]}}]
        }).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # quiet
        pass


@pytest.fixture()
def mock_chat_endpoint():
    _ChatHandler.responses = []
    _ChatHandler.requests = []
    server = HTTPServer(("127.0.0.1", 0), _ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", _ChatHandler
    finally:
        server.shutdown()
        thread.join(timeout=2)


def test_synth_llm_against_local_mock(bench122_file, tmp_path, solver_config,
                                      mock_chat_endpoint, capsys):
    url, handler = mock_chat_endpoint
    handler.responses = [
        f"Let me try:\n```\n{WEAK_122}\n```",
        f"Strengthened:\n```\n{REPAIRED_122}\n```",
    ]
    code = run_cli("synth", bench122_file, "--proposer", "llm",
                   "--endpoint", url, "--model", "mock-model",
                   "--solver", solver_config.path, "--out", tmp_path / "out", "--json")
    doc = json.loads(capsys.readouterr().out)
    assert code == 0
    assert doc["status"] == "solved"
    assert doc["totals"]["proposals"] == 2

    assert len(handler.requests) == 2
    for req in handler.requests:
        assert req["path"] == "/chat/completions"
        assert req["body"]["temperature"] == 0
        assert req["body"]["model"] == "mock-model"
    repair_prompt = handler.requests[1]["body"]["messages"][0]["content"]
    assert "Refine the invariant to rule out this counterexample/error." in repair_prompt
    assert WEAK_122 in repair_prompt  # history included
