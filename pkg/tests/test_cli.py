import csv
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from qeskit import catalog
from qeskit.cli import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    EXIT_VERIFY,
    atomic_write,
    main,
    samples_csv,
)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run(argv, tmp_path, capsys=None):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        code = main([str(a) for a in argv])
    finally:
        os.chdir(cwd)
    return code


# -- catalog ------------------------------------------------------------------------------


def test_catalog_list(tmp_path, capsys):
    assert run(["catalog", "list"], tmp_path) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("case1", "case2", "case3", "oscillator", "rosen_morse", "razavy"):
        assert name in out


def test_catalog_show(tmp_path, capsys):
    assert run(["catalog", "show", "case3"], tmp_path) == EXIT_OK
    out = capsys.readouterr().out
    assert "b (default 1)" in out and "epsilon1 (default 1)" in out
    assert "epsilon = epsilon1 + 3b^2/2" in out


def test_catalog_show_unknown(tmp_path, capsys):
    assert run(["catalog", "show", "nosuch"], tmp_path) == EXIT_USAGE
    assert "unknown catalog entry" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert run([], tmp_path) == EXIT_USAGE
    assert run(["frobnicate"], tmp_path) == EXIT_USAGE
    assert run(["build"], tmp_path) == EXIT_USAGE
    assert run(["build", "case1", "c"], tmp_path) == EXIT_USAGE
    assert run(["build", "case1", "--grid-points", "4000"], tmp_path) == EXIT_USAGE
    assert run(["--help"], tmp_path) == EXIT_OK


# -- build ---------------------------------------------------------------------------------


def test_build_inline_oscillator(tmp_path, capsys):
    code = run(["build", "--expr", "4*e*e1*x^2", "--epsilon", 1, "--epsilon1", 1, "e=1", "e1=1", "--out", "osc"], tmp_path)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "osc" / "model.json").read_text())
    assert doc["energies"] == [0.0, 1.0, 2.0]
    assert doc["validation"]["passed"] is True
    header, data = read_csv(tmp_path / "osc" / "samples.csv")
    assert header == ["x", "V", "psi0", "psi1", "psi2"]
    x = data[:, 0]
    assert np.max(np.abs(data[:, 1] - (0.5 * x * x - 0.5))) < 1e-8


def test_build_case1_csv_matches_grid(tmp_path):
    assert run(["build", "case1", "c=1", "--out", "c1"], tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "c1" / "model.json").read_text())
    header, data = read_csv(tmp_path / "c1" / "samples.csv")
    assert header == ["x", "V", "psi0", "psi1", "psi2"]
    assert data.shape == (doc["grid"]["points"], 5)
    assert np.all(np.isfinite(data))
    assert data[0, 0] == pytest.approx(-doc["grid"]["half_width"]) and data[-1, 0] == pytest.approx(doc["grid"]["half_width"])


def test_build_grid_flags(tmp_path):
    assert run(["build", "oscillator", "--grid-points", 1001, "--half-width", 9, "--out", "g"], tmp_path) == EXIT_OK
    _, data = read_csv(tmp_path / "g" / "samples.csv")
    assert data.shape[0] == 1001 and data[-1, 0] == 9.0


def test_build_constraint_violation(tmp_path, capsys):
    lo, hi = catalog.rational_interval(2.0, 1.0)
    code = run(["build", "rational", "epsilon=2", f"epsilon1={hi + 0.1}", "b=1", "--out", "bad"], tmp_path)
    assert code == EXIT_VALIDATION
    assert "13/4" in capsys.readouterr().out
    assert not (tmp_path / "bad").exists()


def test_build_failing_generator(tmp_path, capsys):
    code = run(["build", "--expr", "4*eps*eps1*x^2", "--epsilon", 1, "--epsilon1", 2, "--out", "f"], tmp_path)
    assert code == EXIT_VALIDATION
    assert "U''''(x0)" in capsys.readouterr().out


def test_build_parse_error(tmp_path, capsys):
    assert run(["build", "--expr", "x^(1/2)", "--epsilon", 1, "--epsilon1", 1], tmp_path) == EXIT_USAGE
    assert run(["build", "--expr", "4*x^2"], tmp_path) == EXIT_USAGE


def test_build_from_config_file(tmp_path):
    cfg = {
        "schema_version": 1,
        "generator": {"catalog": "case2", "params": {"b": 1.2}},
        "grid": {"points": 2001},
        "verification": {"tolerances": {"eigenvalue": 1e-3}},
    }
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    assert run(["build", "--config", "run.json", "--out", "m"], tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "m" / "model.json").read_text())
    assert doc["energies"] == pytest.approx([0.0, 1.5 * 1.44, 2.0 * 1.44])
    assert run(["verify", "m/model.json"], tmp_path) == EXIT_OK


def test_config_schema_errors(tmp_path, capsys):
    (tmp_path / "both.json").write_text(json.dumps({"schema_version": 1, "generator": {"catalog": "case1", "expression": "x^2"}}))
    assert run(["build", "--config", "both.json"], tmp_path) == EXIT_USAGE
    (tmp_path / "neg.json").write_text(
        json.dumps({"schema_version": 1, "generator": {"catalog": "case1"}, "verification": {"tolerances": {"gram": -1}}})
    )
    assert run(["build", "--config", "neg.json"], tmp_path) == EXIT_USAGE
    (tmp_path / "broken.json").write_text("{not json")
    assert run(["build", "--config", "broken.json"], tmp_path) == EXIT_USAGE
    assert run(["build", "--config", "missing.json"], tmp_path) == EXIT_USAGE


# -- verify --------------------------------------------------------------------------------


@pytest.mark.parametrize("name", catalog.names())
def test_build_verify_round_trip(name, tmp_path):
    assert run(["build", name, "--out", name], tmp_path) == EXIT_OK
    assert run(["verify", f"{name}/model.json", "--out", f"{name}/report.json"], tmp_path) == EXIT_OK
    report = json.loads((tmp_path / name / "report.json").read_text())
    assert report["passed"] is True and report["kind"] == "report" and report["schema_version"] == 1


def test_verify_case2_zero_mode(tmp_path, capsys):
    assert run(["verify", "case2", "--out", "r.json"], tmp_path) == EXIT_OK
    report = json.loads((tmp_path / "r.json").read_text())
    assert abs(report["extrapolated"][0]) < 1e-6


def test_verify_case3_two_state_regime(tmp_path, capsys):
    # alpha = 1 + 2 epsilon1/b^2 = 0.8
    assert run(["verify", "case3", "b=1", "epsilon1=-0.1"], tmp_path) == EXIT_OK
    assert "bound_states=2" in capsys.readouterr().out


def test_verify_tight_tolerance_fails(tmp_path):
    assert run(["verify", "case1", "--tolerance", 1e-14], tmp_path) == EXIT_VERIFY


def test_verify_corrupted_model(tmp_path, capsys):
    assert run(["build", "case1", "--out", "c"], tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "c" / "model.json").read_text())
    doc["energies"] = "lots"
    (tmp_path / "c" / "model.json").write_text(json.dumps(doc))
    assert run(["verify", "c/model.json"], tmp_path) == EXIT_USAGE
    assert "schema error" in capsys.readouterr().err


def test_verify_stale_model(tmp_path):
    assert run(["build", "case1", "--out", "c"], tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "c" / "model.json").read_text())
    doc["energies"][1] *= 1.01
    (tmp_path / "c" / "model.json").write_text(json.dumps(doc))
    assert run(["verify", "c/model.json"], tmp_path) == EXIT_USAGE


# -- chain ---------------------------------------------------------------------------------


def test_chain_oscillator_two_steps(tmp_path):
    assert run(["chain", "oscillator", "--steps", 2, "--epsilon", 1, "--out", "ch"], tmp_path) == EXIT_OK
    summary = json.loads((tmp_path / "ch" / "chain.json").read_text())
    assert [s["index"] for s in summary["steps"]] == [0, 1, 2]
    for s in summary["steps"][1:]:
        assert s["levels_match"] is True
        assert s["closed_form_max_discrepancy"] < 1e-7
    header, data = read_csv(tmp_path / "ch" / "step2.csv")
    assert header == ["x", "V_minus", "V_plus", "zero_mode", "V_minus_closed"]
    x = data[:, 0]
    q = 3 + 12 * x * x + 4 * x**4
    printed = x * x / 2 + 8 * (2 * x * x - 3) / q + 384 * x * x / q**2 + 3.5
    assert np.max(np.abs(data[:, 1] - printed)) < 1e-7
    assert summary["steps"][2]["levels"] == pytest.approx([0, 5, 6, 7], abs=5e-3)


def test_chain_zero_steps_echoes_source(tmp_path):
    assert run(["chain", "oscillator", "--steps", 0, "--out", "z"], tmp_path) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "z").iterdir()) == ["chain.json", "step0.csv"]
    header, data = read_csv(tmp_path / "z" / "step0.csv")
    assert header == ["x", "V"]
    assert np.allclose(data[:, 1], 0.5 * data[:, 0] ** 2 - 0.5, atol=1e-9)


def test_chain_morse(tmp_path):
    assert run(["chain", "morse", "--steps", 1, "--epsilon", 3, "--out", "m"], tmp_path) == EXIT_OK
    summary = json.loads((tmp_path / "m" / "chain.json").read_text())
    step = summary["steps"][1]
    assert step["levels_match"] and step["expected_levels"] == [0.0, 6.0]
    assert step["closed_form_max_discrepancy"] < 1e-5


def test_chain_errors(tmp_path):
    assert run(["chain", "hydrogen"], tmp_path) == EXIT_USAGE
    assert run(["chain", "oscillator", "--steps", -1], tmp_path) == EXIT_USAGE
    assert run(["chain", "morse", "--steps", 3, "--epsilon", 3], tmp_path) == EXIT_VALIDATION


def test_chain_from_model_file(tmp_path):
    assert run(["build", "case1", "--out", "c"], tmp_path) == EXIT_OK
    assert run(["chain", "c/model.json", "--out", "cc"], tmp_path) == EXIT_OK
    assert run(["chain", "c/model.json", "--steps", 2, "--out", "cc"], tmp_path) == EXIT_USAGE
    header, data = read_csv(tmp_path / "cc" / "step1.csv")
    assert header[:3] == ["x", "V_minus", "V_plus"] and np.all(np.isfinite(data))


# -- export and files -------------------------------------------------------------------------


def test_export_formats(tmp_path):
    assert run(["export", "case3", "--out", "s.csv"], tmp_path) == EXIT_OK
    header, data = read_csv(tmp_path / "s.csv")
    assert header == ["x", "V", "psi0", "psi1", "psi2"]
    assert run(["export", "case3", "b=1", "epsilon1=-0.25", "--out", "one.csv"], tmp_path) == EXIT_OK
    header, _ = read_csv(tmp_path / "one.csv")
    assert header == ["x", "V", "psi0"]
    assert run(["export", "oscillator", "--format", "json", "--out", "s.json"], tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["energies"] == [0.0, 1.0, 2.0] and set(doc["columns"]) == {"x", "V", "psi0", "psi1", "psi2"}


def test_csv_is_lossless():
    x = np.array([math.pi, -1e-300, 1 / 3])
    text = samples_csv({"x": x})
    assert np.array_equal(np.array(text.split()[1:], dtype=float), x)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = atomic_write(tmp_path / "d" / "f.txt", "a")
    atomic_write(p, "b")
    assert p.read_text() == "b"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "qeskit", "catalog", "list"], capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0 and "case1" in res.stdout
    res = subprocess.run(["qeskit", "catalog", "show", "nosuch"], capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 2
