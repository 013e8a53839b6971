import subprocess
import sys

import pytest

from dwsg.cli import EXIT_DIFF, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, main
from dwsg.pipeline import loads_machine


def test_verify_e2_exit_ok(capsys):
    assert main(["verify", "--ref", "E2"]) == EXIT_OK
    assert "E2" in capsys.readouterr().out


def test_verify_trace_reports_diff(capsys):
    assert main(["verify", "--ref", "trE4", "-j", "2"]) == EXIT_DIFF
    out = capsys.readouterr().out
    assert "C5" in out and "C6" in out


@pytest.mark.parametrize(
    "argv",
    [["bogus"], ["compute", "--order", "9"], ["compute", "--jobs", "0"], ["verify"], ["compute", "--kind", "other"]],
)
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[run]\nkind = "minimal"\norder = 4\n')
    # the flag wins over the file
    assert main(["compute", "--config", str(cfg), "--order", "2"]) == EXIT_OK
    res = loads_machine(capsys.readouterr().out)
    assert (res.kind, res.order) == ("minimal", 2)
    assert len(res.poly.terms) == 2


def test_bad_config(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("colour = 1\n")
    assert main(["compute", "--config", str(cfg)]) == EXIT_USAGE
    cfg.write_text("order = [\n")
    assert main(["compute", "--config", str(cfg)]) == EXIT_USAGE
    assert main(["compute", "--config", str(tmp_path / "missing.toml")]) == EXIT_USAGE


def test_cache_env_and_outputs(tmp_path, monkeypatch, capsys):
    cache = tmp_path / "cache"
    monkeypatch.setenv("DWSG_CACHE_DIR", str(cache))
    assert main(["colim", "--order", "2"]) == EXIT_OK
    assert any(cache.iterdir())
    out = tmp_path / "out"
    argv = ["compute", "--order", "2", "--output-dir", str(out), "--format", "latex", "--format", "machine"]
    assert main(argv) == EXIT_OK
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert sorted(first) == ["E2_nonminimal_symbolic.tex", "E2_nonminimal_symbolic.txt"]
    assert main(argv) == EXIT_OK
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first


def test_colim_without_cache_is_usage(monkeypatch):
    monkeypatch.delenv("DWSG_CACHE_DIR", raising=False)
    assert main(["colim"]) == EXIT_USAGE


def test_internal_error_code(monkeypatch):
    import dwsg.pipeline as pl

    def boom(cfg):
        raise RuntimeError("boom")

    monkeypatch.setattr(pl, "compute_e", boom)
    assert main(["verify", "--ref", "E2"]) == EXIT_INTERNAL


def test_rank_command(capsys):
    assert main(["rank", "--ref", "E2", "--seed", "3"]) == EXIT_OK
    assert "rank" in capsys.readouterr().out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "dwsg.cli", "compute", "--kind", "minimal"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "X(a,b)" in r.stdout
