import json
import subprocess
import sys

import pytest

from dualwave import cli
from dualwave.model import ConfigError

SMALL = ["--set", "grid.n=2001", "--set", "solver.res_tol=1e-2"]


def _report(path):
    return json.loads((path / "report.json").read_text())


def test_solve_definite_preset(tmp_path, capsys):
    out = tmp_path / "run"
    status = cli.main(["solve", "--preset", "oscillator-definite", *SMALL, "--out", str(out)])
    assert status == 0
    rep = _report(out)
    assert rep["schema_version"] == 1 and rep["status"] == 0
    assert rep["result"]["mode"] == "mountain-pass" and rep["result"]["converged"]
    assert rep["spectrum"]["ell"] == 0
    assert {"profile.csv", "iters.csv", "spectrum.csv", "report.json"} <= {p.name for p in out.iterdir()}
    header = (out / "iters.csv").read_text().splitlines()[0]
    assert header.startswith("iter,stage,phi,grad,rho")
    assert "ok" in capsys.readouterr().out


def test_reports_are_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["solve", "--preset", "oscillator-definite", *SMALL, "--seed", "3",
                         "--out", str(d)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "profile.csv").read_bytes() == (b / "profile.csv").read_bytes()


def test_missing_mu_is_config_error(tmp_path, capsys):
    cfg = {"problem": {"potential": {"kind": "harmonic", "omega": 0.0},
                       "nonlinearity": {"kind": "power", "p": 6}},
           "grid": {"R": 6.0, "n": 2001}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "never"
    assert cli.main(["solve", "--config", str(path), "--out", str(out)]) == 2
    assert not out.exists()
    assert "mu" in capsys.readouterr().err


@pytest.mark.parametrize("override", ["solver.bogus=1", "grid.n=10", "extra.key=1"])
def test_bad_overrides_rejected(tmp_path, override):
    out = tmp_path / "x"
    assert cli.main(["solve", "--preset", "oscillator-definite", "--set", override,
                     "--out", str(out)]) == 2
    assert not out.exists()


def test_config_source_rules():
    args = cli.build_parser().parse_args(["solve"])
    with pytest.raises(ConfigError):
        cli.load_raw(args)
    args = cli.build_parser().parse_args(["solve", "--preset", "nope"])
    with pytest.raises(ConfigError):
        cli.load_raw(args)


def test_dry_run(tmp_path, capsys):
    out = tmp_path / "dry"
    assert cli.main(["multi", "--preset", "oscillator-indefinite", "--out", str(out), "--dry-run"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["pipeline"][-1] == "multiplicity search"
    assert payload["config"]["grid"]["n"] == 128001
    assert not out.exists()


def test_validate_spectrum_and_table(tmp_path):
    out = tmp_path / "v"
    assert cli.main(["validate", "--preset", "oscillator-indefinite", "--out", str(out)]) == 0
    assert _report(out)["validation"]["passed"]
    out = tmp_path / "s"
    assert cli.main(["spectrum", "--preset", "oscillator-indefinite", *SMALL, "--out", str(out)]) == 0
    spec = _report(out)["spectrum"]
    assert spec["ell"] == 2 and spec["eta"] == pytest.approx(1 / 7, abs=1e-4)
    out = tmp_path / "t"
    assert cli.main(["transform-table", "--preset", "oscillator-definite",
                     "--set", "solver.table_count=11", "--out", str(out)]) == 0
    rows = (out / "transform.csv").read_text().splitlines()
    assert rows[0] == "t,f,f_prime,f_second" and len(rows) == 12
    assert _report(out)["transform"]["passed"]


def test_degenerate_solve_reports_failure(tmp_path):
    out = tmp_path / "deg"
    status = cli.main(["solve", "--preset", "oscillator-definite", *SMALL,
                       "--set", "problem.potential.omega=3.0", "--set", "problem.shift=null",
                       "--out", str(out)])
    assert status == 1
    rep = _report(out)
    assert rep["status"] == 1 and "error" in rep


def test_probe_and_continue_small(tmp_path):
    out = tmp_path / "p"
    assert cli.main(["probe", "--preset", "oscillator-indefinite", *SMALL,
                     "--set", "solver.n_dirs=20", "--out", str(out)]) == 0
    assert [p["passed"] for p in _report(out)["probes"]] == [True, True, True]
    out = tmp_path / "c"
    assert cli.main(["continue", "--preset", "oscillator-continuation", *SMALL,
                     "--set", "solver.coarse_n=null", "--set", "solver.K=12", "--out", str(out)]) == 0
    modes = [p["mode"] for p in _report(out)["continuation"]]
    assert modes == ["mountain-pass", "local-linking", "skipped", "local-linking"]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "dualwave.cli", "validate", "--preset",
                          "oscillator-definite", "--dry-run"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["command"] == "validate"
