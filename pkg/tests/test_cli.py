"""End-to-end runs of the command line entry point."""

from __future__ import annotations

import json
from io import StringIO

import numpy as np
import pandas as pd
import pytest

from tridesign.cli import main
from tridesign.constants import SCHEMA_VERSION
from tridesign.storage import HDF5StorageService


def _run_json(tmp_path, *argv: str) -> dict:  # type: ignore[no-untyped-def]
    out = tmp_path / "out.json"
    assert main([*argv, "--out", str(out)]) == 0
    return json.loads(out.read_text(encoding="utf-8"))


def test_dstar_quadratic_brownian(tmp_path) -> None:  # type: ignore[no-untyped-def]
    doc = _run_json(tmp_path, "dstar", "--model", "quadratic:nu=1", "--kernel", "brownian")
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["command"] == "dstar"
    assert doc["config"]["model"] == {"family": "quadratic", "nu": 1}
    assert doc["dstar"] == pytest.approx(3 / 40, rel=1e-10)
    assert doc["psi"] == pytest.approx(3 / 40, rel=1e-10)
    assert doc["masses"]["a"] == pytest.approx(0.0, abs=1e-12)
    assert len(doc["density_samples"]) == 101


def test_dstar_matrix_model(tmp_path) -> None:  # type: ignore[no-untyped-def]
    doc = _run_json(tmp_path, "dstar", "--model", "monomial:m=4")
    assert doc["psi"] == pytest.approx(60 ** 0.25, rel=1e-8)
    assert np.linalg.det(np.array(doc["dstar"])) == pytest.approx(60.0, rel=1e-6)
    assert doc["representation"] == "diagonal"


def test_design_location(tmp_path) -> None:  # type: ignore[no-untyped-def]
    doc = _run_json(tmp_path, "design", "--model", "location", "--kernel", "brownian")
    assert doc["masses"]["a"] == pytest.approx(1.0)
    assert doc["masses"]["b"] == pytest.approx(0.0, abs=1e-12)
    assert doc["sign_changes"] == []


def test_table_csv(capsys) -> None:  # type: ignore[no-untyped-def]
    assert main(["table", "--table", "3", "--format", "csv"]) == 0
    frame = pd.read_csv(StringIO(capsys.readouterr().out))
    assert list(frame.columns) == ["table", "kernel", "quantity", "t", "value"]
    row = frame[(frame.kernel == "brownian") & (frame.quantity == "P_b")]
    total = 0.8 + 2 * (np.arctan(2) - np.arctan(1))
    assert float(row.value.iloc[0]) == pytest.approx(-0.8 / total, rel=1e-9)


def test_finite_plan_then_simulate(tmp_path) -> None:  # type: ignore[no-untyped-def]
    plan_path = tmp_path / "plan.csv"
    argv = ["--model", "quadratic:nu=1", "--kernel", "brownian"]
    assert main(["finite-plan", *argv, "--n", "4", "--format", "csv", "--out", str(plan_path)]) == 0
    plan = pd.read_csv(plan_path)
    assert list(plan.columns) == ["t", "w"]
    assert len(plan) == 6

    doc = _run_json(
        tmp_path, "simulate", *argv, "--plan", str(plan_path), "--reps", "4000", "--seed", "3",
        "--theta", "1.5",
    )
    assert doc["reps"] == 4000
    assert doc["theta"] == [1.5]
    assert isinstance(doc["covariance_within_3se"], bool)
    assert doc["analytic_covariance"][0][0] > 3 / 40


def test_finite_plan_json(tmp_path) -> None:  # type: ignore[no-untyped-def]
    doc = _run_json(tmp_path, "finite-plan", "--model", "quadratic:nu=1", "--n", "2")
    np.testing.assert_allclose(doc["points"][1:-1], [1.24, 1.56], atol=0.005)
    assert doc["criterion"] > 3 / 40
    assert doc["degenerate"] is False


def test_compare_json(tmp_path) -> None:  # type: ignore[no-untyped-def]
    doc = _run_json(
        tmp_path, "compare", "--model", "quadratic:nu=1", "--n-range", "2..3", "--restarts", "1",
    )
    assert doc["study"] == "compare_quadratic_brownian"
    rows = doc["rows"]
    assert [row["n"] for row in rows] == [2, 3]
    for row in rows:
        assert row["dstar"] == pytest.approx(3 / 40)
        assert row["blue_optimized"] <= row["blue_plan"] + 1e-12
        assert row["blue_plan"] <= row["wlse_plan"] + 1e-12


def test_compare_h5(tmp_path) -> None:  # type: ignore[no-untyped-def]
    out = tmp_path / "study.h5"
    argv = [
        "compare", "--model", "linear", "--kernel", "exp-pair:lambda=1", "--n-range", "2..3",
        "--restarts", "1", "--workers", "2", "--format", "h5", "--out", str(out),
    ]
    assert main(argv) == 0
    study = HDF5StorageService(out).load("compare_linear_exp_pair")
    assert study.list_runs() == ["00000", "00001"]
    assert study.parameters["kernel"].value == {"family": "exp-pair", "lambda": 1}
    assert len(study.collect_runs("blue_plan")) == 2


def test_config_file_and_flags(tmp_path) -> None:  # type: ignore[no-untyped-def]
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"model": "linear", "kernel": "brownian", "n": 3}))
    doc = _run_json(tmp_path, "finite-plan", "--config", str(config), "--n", "5")
    assert doc["n"] == 5
    assert doc["config"]["model"] == {"family": "linear"}


@pytest.mark.parametrize(
    "argv",
    [
        ["design", "--kernel", "matern:nu=1"],
        ["dstar", "--format", "h5", "--out", "x.h5"],
        ["table"],
        ["compare", "--format", "h5", "--n", "2"],
        ["simulate", "--format", "csv", "--reps", "10"],
        ["design", "--model", "trig", "--a", "2", "--b", "1"],
    ],
)
def test_usage_errors_exit_2(argv, capsys) -> None:  # type: ignore[no-untyped-def]
    assert main(argv) == 2
    assert "tridesign: error:" in capsys.readouterr().err


def test_missing_plan_exits_3(tmp_path, capsys) -> None:  # type: ignore[no-untyped-def]
    argv = ["simulate", "--plan", str(tmp_path / "none.csv"), "--reps", "10"]
    assert main(argv) == 3
    assert "tridesign: storage failure:" in capsys.readouterr().err


def test_finite_plan_matrix_model(tmp_path) -> None:  # type: ignore[no-untyped-def]
    doc = _run_json(tmp_path, "finite-plan", "--model", "monomial:m=4", "--n", "5")
    assert np.array(doc["matrices"]).shape == (7, 4, 4)
    assert doc["proportional"] is True
    assert doc["criterion"] > 60 ** 0.25

    plan_path = tmp_path / "plan.csv"
    argv = ["--model", "monomial:m=4", "--n", "5"]
    assert main(["finite-plan", *argv, "--format", "csv", "--out", str(plan_path)]) == 0
    assert list(pd.read_csv(plan_path).columns) == ["t", "w_1", "w_2", "w_3", "w_4"]
    sim = _run_json(
        tmp_path, "simulate", *argv, "--plan", str(plan_path), "--reps", "2000", "--seed", "1"
    )
    assert np.array(sim["analytic_covariance"]).shape == (4, 4)
