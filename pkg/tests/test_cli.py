import json
import subprocess
import sys

import pytest

from procfuzz.cli import EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, main
from procfuzz.sim.dut import BugId
from procfuzz.sim.golden import run
from procfuzz.traceio import serialize_log, write_program
from procfuzz.witnesses import witness

from helpers import prog

FAST = ["--iters", "60", "--trials", "2"]


def _fuzz(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["fuzz", *FAST, "--out", str(out), *extra])
    return code, out


def test_fuzz_outputs_are_byte_identical(tmp_path, capsys):
    c1, a = _fuzz(tmp_path, "a", "--seed", "5")
    c2, b = _fuzz(tmp_path, "b", "--seed", "5")
    assert c1 == c2 == EXIT_OK
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    report = json.loads((a / "report.json").read_text())
    assert report["config"]["master_seed"] == 5 and len(report["trials"]) == 2
    assert sorted(p.name for p in (a / "corpus").iterdir()) == ["trial-00", "trial-01"]
    printed = capsys.readouterr().out
    assert "# effective config" in printed and "seed = 5" in printed


def test_env_seed_matches_flag(tmp_path, monkeypatch):
    _, a = _fuzz(tmp_path, "flag", "--seed", "9")
    monkeypatch.setenv("PROCFUZZ_SEED", "9")
    _, b = _fuzz(tmp_path, "env")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_entropy_seed_is_printed(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("PROCFUZZ_SEED", raising=False)
    code, out = _fuzz(tmp_path, "e")
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "drawn from entropy" in text
    seed = json.loads((out / "report.json").read_text())["config"]["master_seed"]
    assert f"--seed {seed}" in text


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('mode = "no-cov"\niters = 40\ntrials = 1\nseed = 3\n')
    code, out = _fuzz(tmp_path, "c", "--config", str(cfg), "--mode", "value-cov")
    assert code == EXIT_OK
    conf = json.loads((out / "report.json").read_text())["config"]
    # FAST flags override the file's iters/trials; --mode overrides its mode
    assert conf["mode"] == "value-cov" and conf["max_iterations"] == 60 and conf["master_seed"] == 3

    # the printed block is itself a valid config reproducing the run
    printed = capsys.readouterr().out.splitlines()
    block = "\n".join(ln for ln in printed if " = " in ln) + "\n"
    again = tmp_path / "again.toml"
    again.write_text(block.replace(f'out = "{out}"', f'out = "{tmp_path / "again"}"'))
    assert main(["fuzz", "--config", str(again)]) == EXIT_OK
    assert (tmp_path / "again" / "report.json").read_bytes() == (out / "report.json").read_bytes()


@pytest.mark.parametrize("argv", [
    ["fuzz", "--mode", "bogus"],
    ["fuzz", "--bugs", "NoSuchBug"],
    ["fuzz", "--selection", "nope"],
    ["fuzz", "--trials", "0"],
    ["bogus-command"],
])
def test_usage_errors(argv, tmp_path, capsys):
    assert main(argv + (["--out", str(tmp_path)] if argv[0] == "fuzz" else [])) == EXIT_USAGE
    err = capsys.readouterr().err
    assert err.strip()


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("colour = 1\n")
    assert main(["fuzz", "--config", str(cfg)]) == EXIT_USAGE
    assert "unknown key" in capsys.readouterr().err
    cfg.write_text("iters = [\n")
    assert main(["fuzz", "--config", str(cfg)]) == EXIT_USAGE


def test_replay_exit_codes(tmp_path, capsys):
    w = witness(BugId.SepcLowBitsWritable)
    path = tmp_path / "w.s"
    write_program(path, w.positive)
    assert main(["replay", str(path), "--bugs", "SepcLowBitsWritable", "-q"]) == EXIT_NEGATIVE
    assert "csr:sepc" in capsys.readouterr().out
    assert main(["replay", str(path), "-q"]) == EXIT_OK
    assert "logs equal" in capsys.readouterr().out
    bad = tmp_path / "bad.s"
    bad.write_text(".priv M\nvadd.vv v1, v2, v3\n")
    assert main(["replay", str(bad)]) == EXIT_USAGE
    assert main(["replay", str(tmp_path / "missing.s")]) == EXIT_USAGE


def test_analyze_exit_codes(tmp_path, capsys):
    log_path = tmp_path / "t.log"
    log_path.write_text(serialize_log(run(prog("csrrwi x0, frm, 1"))))
    map_path = tmp_path / "m.tsv"
    assert main(["analyze", str(log_path), "--map-out", str(map_path)]) == EXIT_OK
    assert "interesting" in capsys.readouterr().out
    assert main(["analyze", str(log_path), "--map-in", str(map_path)]) == EXIT_NEGATIVE
    assert main(["analyze", str(log_path), "--selection", "fp-csr"]) == EXIT_USAGE
    (tmp_path / "junk.log").write_text("not a log\n")
    assert main(["analyze", str(tmp_path / "junk.log")]) == EXIT_USAGE


def test_trace_and_witness_commands(tmp_path, capsys):
    path = tmp_path / "p.s"
    write_program(path, prog("addi x1, x0, 1"))
    out = tmp_path / "p.log"
    assert main(["trace", str(path), "-o", str(out)]) == EXIT_OK
    assert out.read_text() == serialize_log(run(prog("addi x1, x0, 1")))
    assert main(["witness", "--emit", str(tmp_path / "w")]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "w").iterdir())
    assert len(names) == 2 * len(BugId) and "SepcLowBitsWritable.pos.s" in names
    assert main(["witness", "NoSuchBug"]) == EXIT_USAGE


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "procfuzz", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("procfuzz ")
