"""Command line behavior: exit codes, JSON output, dumps, bench."""

import json
import shutil
import subprocess

import pytest

from kinduct.cli import (
    EXIT_FALSE, EXIT_TRUE, EXIT_UNKNOWN, EXIT_USAGE, main,
)
from conftest import CORPUS, corpus_path

FIG1_DUMP = """\
0: ASSIGN x := *
1: COND_GOTO !(x > 0) -> 4
2: ASSIGN x := x - 1
3: GOTO 1
4: ASSERT x == 0
5: ASSIGN main.ret := 0"""


def run(*argv):
    return main(list(argv))


def test_exit_code_true():
    assert run("verify", str(corpus_path("fig1_unsigned.mc"))) == EXIT_TRUE


def test_exit_code_false():
    assert run("verify", str(corpus_path("wrap_bug.mc"))) == EXIT_FALSE


def test_exit_code_unknown():
    assert run("verify", str(corpus_path("count_up.mc")),
               "--invariants", "none", "--k-max", "3") == EXIT_UNKNOWN


def test_exit_code_missing_file(capsys):
    assert run("verify", "/nonexistent/prog.mc") == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_exit_code_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.mc"
    bad.write_text("int main() { int *p; return 0; }\n")
    assert run("verify", str(bad)) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_exit_code_usage_errors(capsys):
    assert run() == EXIT_USAGE
    assert run("verify") == EXIT_USAGE
    assert run("verify", "x.mc", "--width-override", "12") == EXIT_USAGE
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert run("--help") == 0
    assert "verify" in capsys.readouterr().out
    assert run("verify", "--help") == 0
    capsys.readouterr()


def test_plain_output_line(capsys):
    run("verify", str(corpus_path("fig1_unsigned.mc")))
    out = capsys.readouterr().out
    assert "TRUE (inductive, k=2)" in out
    assert "ms]" in out


def test_json_output_proof(capsys):
    path = str(corpus_path("fig1_unsigned.mc"))
    assert run("verify", path, "--json") == EXIT_TRUE
    obj = json.loads(capsys.readouterr().out)
    assert obj["file"] == path
    assert obj["status"] == "TRUE"
    assert obj["phase"] == "INDUCTIVE"
    assert obj["k"] == 2
    assert isinstance(obj["time_ms"], int)
    assert "trace" not in obj


def test_json_output_counterexample(capsys):
    assert run("verify", str(corpus_path("fig1_bug.mc")), "--json") == EXIT_FALSE
    obj = json.loads(capsys.readouterr().out)
    assert obj["status"] == "FALSE" and obj["phase"] == "BASE"
    assert obj["trace"]["states"] == [{"x": 0}, {"x": 0}]
    assert obj["trace"]["violated"] == {"line": 6, "col": 3}


def test_show_cex(capsys):
    run("verify", str(corpus_path("fig1_bug.mc")), "--show-cex")
    out = capsys.readouterr().out
    assert "violated assertion at line 6" in out
    assert "s[0] x=0" in out


def test_dump_goto_golden(capsys):
    assert run("verify", str(corpus_path("fig1_unsigned.mc")),
               "--dump-goto", "--invariants", "none") == EXIT_TRUE
    assert capsys.readouterr().out.strip() == FIG1_DUMP


def test_dump_invariants(capsys):
    assert run("verify", str(corpus_path("fig1_unsigned.mc")),
               "--dump-invariants") == EXIT_TRUE
    assert "head@1: 0 <= x" in capsys.readouterr().out


def test_dump_unwound_with_k(capsys):
    assert run("verify", str(corpus_path("fig1_unsigned.mc")),
               "--dump-unwound", "forward", "--k", "2",
               "--invariants", "none") == EXIT_TRUE
    out = capsys.readouterr().out
    assert "forward" in out and "k=2" in out


def test_emit_directories(tmp_path, capsys):
    smt = tmp_path / "smt"
    cnf = tmp_path / "cnf"
    assert run("verify", str(corpus_path("fig1_unsigned.mc")),
               "--emit-smt", str(smt), "--emit-cnf", str(cnf)) == EXIT_TRUE
    capsys.readouterr()
    assert len(list(smt.glob("*.smt2"))) == 4
    assert len(list(cnf.glob("*.cnf"))) == 4


def bench_manifest(tmp_path):
    path = tmp_path / "m.tsv"
    path.write_text(
        f"{CORPUS}/straightline_safe.mc\tsafe\tstraightline\n"
        f"{CORPUS}/wrap_bug.mc\tunsafe\tbitvector\n")
    return str(path)


def test_bench_subcommand(tmp_path, capsys):
    csv_out = tmp_path / "rows.csv"
    json_out = tmp_path / "report.json"
    assert run("bench", bench_manifest(tmp_path),
               "--csv", str(csv_out), "--json", str(json_out)) == EXIT_TRUE
    out = capsys.readouterr().out
    assert "score               3" in out
    assert csv_out.read_text().startswith("path,expected,verdict")
    data = json.loads(json_out.read_text())
    assert data["score"] == 3 and len(data["rows"]) == 2


def test_bench_manifest_error(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("only-one-field\n")
    assert run("bench", str(bad)) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("kinduct") is None,
                    reason="console script not on PATH")
def test_installed_entry_point():
    proc = subprocess.run(
        ["kinduct", "verify", str(corpus_path("fig1_unsigned.mc"))],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "TRUE" in proc.stdout
