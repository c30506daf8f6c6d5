import subprocess
import sys

import pytest

from cranzf import __version__
from cranzf.cli import main

from test_harness import SMALL


def _values(out):
    return {k: float(v) for k, v in (line.split() for line in out.strip().splitlines())}


def test_bound_theorem1(capsys):
    rc = main(["bound", "--theorem", "1", "--M", "4", "--Q", "8", "--Nt", "8",
               "--B", "160", "--Pmax-db", "35"])
    assert rc == 0
    v = _values(capsys.readouterr().out)
    assert list(v) == ["deltaR1", "deltaR2", "phi", "lower_bound"]
    assert v["deltaR1"] == pytest.approx(8.870194885216943, rel=1e-9)
    assert v["deltaR2"] == pytest.approx(148.28121127078102, rel=1e-9)
    assert v["phi"] == pytest.approx(11.242166452343604, rel=1e-9)
    assert v["lower_bound"] == 0.0


def test_bound_corollary2(capsys):
    assert main(["bound", "--corollary", "2", "--M", "4", "--Q", "8", "--Nt", "8",
                 "--B", "160", "--Pmax-db", "35", "--qbar", "4"]) == 0
    v = _values(capsys.readouterr().out)
    assert v["deltaR_AG"] == pytest.approx(2.2804810498358871, rel=1e-9)
    assert v["lower_bound"] == pytest.approx(
        11.242166452343604 - 0.20571517634532686 - 2.46426671259922 - 2.2804810498358871, rel=1e-9)


def test_bound_infinite_budget(capsys):
    assert main(["bound", "--theorem", "1", "--B", "inf", "--Pmax-db", "15"]) == 0
    v = _values(capsys.readouterr().out)
    assert v["deltaR1"] == 0 and v["lower_bound"] == pytest.approx(4.6572329230425643, rel=1e-9)


@pytest.mark.parametrize("argv", [
    ["bound", "--theorem", "2", "--qbar", "3", "--B", "160", "--Pmax-db", "35"],
    ["bound", "--theorem", "1", "--qbar", "2", "--B", "160", "--Pmax-db", "35"],
    ["bound", "--theorem", "1", "--B", "2", "--Pmax-db", "35"],
    ["simulate", "--scheme", "paq", "--qbar", "3", "--B", "160", "--Pmax-db", "35"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_flag_prints_usage():
    r = subprocess.run([sys.executable, "-m", "cranzf", "bound", "--frobnicate"],
                       capture_output=True, text=True)
    assert r.returncode != 0
    assert "usage:" in r.stderr


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_simulate(capsys):
    assert main(["simulate", "--scheme", "paq", "--qbar", "4", "--B", "160", "--Pmax-db", "35",
                 "--trials", "20", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "throughput" in out and out.count("q=") == 8


def test_sweep_writes_outputs(tmp_path, capsys):
    spec = tmp_path / "exp.yaml"
    spec.write_text(SMALL)
    out = tmp_path / "res"
    assert main(["sweep", str(spec), "--out", str(out), "--trials", "10", "--seed", "4"]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"results.csv", "candidates.csv", "spec.resolved.yaml", "rate_vs_B_bits.svg"} <= names
    assert "seed: 4" in (out / "spec.resolved.yaml").read_text()
    assert "trials: 10" in (out / "spec.resolved.yaml").read_text()


def test_sweep_bad_spec_reports_line(tmp_path, capsys):
    spec = tmp_path / "exp.yaml"
    spec.write_text(SMALL.replace("trials: 25", "trials: 25\nfoo: 1"))
    assert main(["sweep", str(spec)]) == 2
    assert f"{spec}:11" in capsys.readouterr().err
    assert main(["sweep", str(tmp_path / "missing.yaml")]) == 2


def test_validate(capsys):
    assert main(["validate", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 5 and "[FAIL]" not in out


def test_sweep_accepts_bundled_name(tmp_path, capsys):
    assert main(["sweep", "symmetric_p_sweep", "--trials", "2", "--no-plots",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "results.csv").exists()
    assert main(["sweep", "no_such_spec"]) == 2
