import json
import subprocess
import sys

import pytest

from nlsd import __version__
from nlsd import stationary as S
from nlsd.cli import main
from nlsd.errors import ConvergenceError

SMALL_BRANCH = ["--k-min", "0.1", "--k-max", "0.3", "--k-step", "0.05", "--dx", "0.05"]


def manifest(path):
    return json.loads((path / "manifest.json").read_text())


def test_va_writes_manifest_with_overrides(tmp_path, capsys):
    out = tmp_path / "va"
    assert main(["va", "--k", "0.1", "--beta", "2", "--gamma", "0", "--out", str(out)]) == 0
    doc = manifest(out)
    assert doc["command"] == "va" and doc["version"] == __version__
    assert doc["k_min"] == doc["k_max"] == 0.1
    assert doc["beta"] == 2.0 and doc["gamma"] == 0.0
    lines = (out / "va.csv").read_text().splitlines()
    assert len(lines) == 2
    assert "1 VA points" in capsys.readouterr().out


def test_manifest_written_before_the_run(tmp_path, monkeypatch):
    from nlsd import experiments

    def boom(cfg, out):
        raise ConvergenceError("forced", last_residual=1.0, k=0.1)

    monkeypatch.setitem(experiments.RUNNERS, "va", boom)
    out = tmp_path / "va"
    assert main(["va", "--out", str(out)]) == 3
    assert manifest(out)["command"] == "va"


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["branch", *SMALL_BRANCH, "--out", str(a)]) == 0
    assert main(["branch", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    for name in ("branch.csv", "cutoff.json", "va.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_plots_do_not_change_numbers(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["branch", *SMALL_BRANCH, "--out", str(a)]) == 0
    assert main(["branch", *SMALL_BRANCH, "--plots", "--out", str(b)]) == 0
    assert (a / "branch.csv").read_bytes() == (b / "branch.csv").read_bytes()
    assert list(b.glob("*.svg")) and not list(a.glob("*.svg"))


def test_branch_without_maximum_is_reported(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["branch", *SMALL_BRANCH, "--beta", "0", "--gamma", "0", "--out", str(out)]) == 0
    assert json.loads((out / "cutoff.json").read_text())["status"] == "no interior maximum"
    assert "no interior maximum" in capsys.readouterr().out


def test_input_errors_exit_2(tmp_path):
    assert main(["va", "--k", "-1", "--out", str(tmp_path / "x")]) == 2
    assert main(["va", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "y")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "branch"}))
    assert main(["va", "--config", str(bad), "--out", str(tmp_path / "z")]) == 2
    assert main(["interact", "--k-min", "0.5", "--out", str(tmp_path / "w")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 2


def test_bracket_error_exit_4(tmp_path):
    assert main(["constants", "--sums", "0", "1", "--out", str(tmp_path / "c")]) == 4


def test_solver_failure_exit_3_keeps_partial(tmp_path, monkeypatch):
    real = S._walk

    def failing(prev, guess, xgrid, k_from, k_to, *args, **kw):
        if k_to > 0.22:
            raise ConvergenceError("forced", last_residual=1.0, k=k_to)
        return real(prev, guess, xgrid, k_from, k_to, *args, **kw)

    monkeypatch.setattr(S, "_walk", failing)
    out = tmp_path / "b"
    assert main(["branch", *SMALL_BRANCH, "--out", str(out)]) == 3
    lines = (out / "branch_partial.csv").read_text().splitlines()
    assert len(lines) == 4  # header and k = 0.1, 0.15, 0.2


def test_tolerance_below_roundoff_exit_3(tmp_path):
    cfg = tmp_path / "tight.json"
    cfg.write_text(json.dumps({"command": "branch", "tol": 1e-30, "k_min": 0.1, "k_max": 0.2,
                               "k_step": 0.1, "dx": 0.1}))
    assert main(["branch", "--config", str(cfg), "--out", str(tmp_path / "t")]) == 3


def test_reproduce_exit_codes(tmp_path, capsys):
    assert main(["reproduce-paper", "--criteria", "4", "12", "--out", str(tmp_path / "r")]) == 0
    text = capsys.readouterr().out
    assert "criterion  4 PASS" in text and "criterion 12 PASS" in text
    doc = json.loads((tmp_path / "r" / "acceptance.json").read_text())
    assert [c["number"] for c in doc] == [4, 12]
    assert main(["reproduce-paper", "--criteria", "2", "--out", str(tmp_path / "r2")]) == 6
    assert main(["reproduce-paper", "--criteria", "13", "--out", str(tmp_path / "r3")]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nlsd", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert __version__ in res.stdout


def test_shipped_configs_are_complete():
    from nlsd import experiments
    from nlsd.acceptance import shipped_config, shipped_configs

    names = shipped_configs()
    assert len(names) == 11
    for name in names:
        raw = shipped_config(name)
        cmd = raw["command"]
        cfg = experiments.merged_config(cmd, raw)
        assert set(experiments.DEFAULTS[cmd]) <= set(cfg)
