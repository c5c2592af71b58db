"""Round-trips of studies through HDF5StorageService."""

from __future__ import annotations

from pathlib import Path

import h5py
import numpy as np
import pandas as pd
import pytest

from tridesign.constants import SCHEMA_VERSION
from tridesign.exceptions import StorageError
from tridesign.storage import HDF5StorageService, json_default
from tridesign.study import Parameter, Result, Study


def test_round_trip_scalars_and_containers(tmp_path) -> None:  # type: ignore[no-untyped-def]
    storage = HDF5StorageService(file_path=Path(tmp_path) / "study.h5")
    study = Study(name="basic")
    study.add_parameter(Parameter(name="kernel", value={"family": "brownian"}, comment="K"))
    study.add_parameter(Parameter(name="a", value=1.0))
    study.add_result(Result(name="dstar", value=0.075))
    storage.save(study)

    loaded = storage.load("basic")
    assert loaded.parameters["kernel"].value == {"family": "brownian"}
    assert loaded.parameters["kernel"].comment == "K"
    assert loaded.parameters["a"].value == 1.0
    assert loaded.results["dstar"].value == pytest.approx(0.075)

    with h5py.File(storage.file_path, "r") as h5:
        assert h5["studies"].attrs["schema_version"] == SCHEMA_VERSION


def test_round_trip_numpy(tmp_path) -> None:  # type: ignore[no-untyped-def]
    storage = HDF5StorageService(file_path=Path(tmp_path) / "numpy.h5")
    study = Study(name="arrays")
    points = np.linspace(1.0, 2.0, 7)
    information = np.array([[1.0, 1.5], [1.5, 7 / 3]])
    study.add_parameter(Parameter(name="points", value=points))
    study.add_result(Result(name="information", value=information))
    storage.save(study)

    loaded = storage.load("arrays")
    np.testing.assert_array_equal(loaded.parameters["points"].value, points)
    np.testing.assert_array_equal(loaded.results["information"].value, information)


def test_round_trip_pandas(tmp_path) -> None:  # type: ignore[no-untyped-def]
    storage = HDF5StorageService(file_path=Path(tmp_path) / "pandas.h5")
    study = Study(name="frames")
    series = pd.Series([0.1, 0.2, 0.7], index=["a", "b", "c"], dtype=float)
    frame = pd.DataFrame({"t": [1.0, 1.5, 2.0], "w": [0.0, 0.25, 0.75]})
    study.add_parameter(Parameter(name="masses", value=series))
    study.add_result(Result(name="plan", value=frame))
    storage.save(study)

    loaded = storage.load("frames")
    pd.testing.assert_series_equal(loaded.parameters["masses"].value, series)
    pd.testing.assert_frame_equal(loaded.results["plan"].value, frame)


def test_runs_survive_a_round_trip(tmp_path) -> None:  # type: ignore[no-untyped-def]
    storage = HDF5StorageService(file_path=Path(tmp_path) / "runs.h5")
    study = Study(name="runs")
    study.record_run("00000", {"n": 2}, {"blue_plan": 0.08, "points": np.array([1.0, 2.0])})
    study.record_run("00001", {"n": 3}, {"blue_plan": 0.078})
    storage.save(study)

    loaded = storage.load("runs")
    assert loaded.list_runs() == ["00000", "00001"]
    assert loaded.get_run_params("00001") == {"n": 3}
    assert loaded.get_run_results("00000")["blue_plan"] == pytest.approx(0.08)
    np.testing.assert_array_equal(loaded.get_run_results("00000")["points"], [1.0, 2.0])
    assert loaded.collect_runs("blue_plan") == pytest.approx([0.08, 0.078])


def test_saving_twice_replaces_the_study(tmp_path) -> None:  # type: ignore[no-untyped-def]
    storage = HDF5StorageService(file_path=Path(tmp_path) / "replace.h5")
    study = Study(name="s")
    study.add_result(Result(name="old", value=1))
    storage.save(study)
    fresh = Study(name="s")
    fresh.add_result(Result(name="new", value=2))
    storage.save(fresh)
    assert set(storage.load("s").results) == {"new"}


def test_missing_study_and_file(tmp_path) -> None:  # type: ignore[no-untyped-def]
    storage = HDF5StorageService(file_path=Path(tmp_path) / "empty.h5")
    with pytest.raises(StorageError):
        storage.load("nothing")
    storage.save(Study(name="present"))
    with pytest.raises(StorageError):
        storage.load("absent")


def test_unserializable_value(tmp_path) -> None:  # type: ignore[no-untyped-def]
    storage = HDF5StorageService(file_path=Path(tmp_path) / "bad.h5")
    study = Study(name="bad")
    study.add_result(Result(name="obj", value=object()))
    with pytest.raises(StorageError):
        storage.save(study)


def test_json_default() -> None:
    assert json_default(np.array([1, 2])) == [1, 2]
    assert json_default(np.float64(0.5)) == 0.5
    with pytest.raises(TypeError):
        json_default(object())
