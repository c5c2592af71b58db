"""HDF5 persistence for studies.

Layout::

    /studies/<name>/parameters/<param_name>
    /studies/<name>/results/<result_name>
    /studies/<name>/runs/<run_id>

Each parameter or result is a group whose ``kind`` attribute says how the
value was written:

- ``json``: the ``value`` attribute holds JSON (scalars, small containers).
- ``ndarray``: a dataset named ``data``.
- ``pandas_series`` / ``pandas_frame``: ``value`` holds ``to_json(orient="split")``.

Run groups carry the parameter snapshot as JSON, the timestamp and the names of
the run's results, which live under ``results/by_run.<run_id>.<name>``.
"""

from __future__ import annotations

import json
from io import StringIO
from pathlib import Path
from typing import Any, Protocol

import h5py
import numpy as np
import pandas as pd

from .constants import (
    HDF5_PARAMETERS_GROUP,
    HDF5_RESULTS_GROUP,
    HDF5_ROOT_GROUP,
    HDF5_RUNS_GROUP,
    SCHEMA_VERSION,
)
from .exceptions import StorageError
from .study import Parameter, Result, Study


class StorageService(Protocol):
    """Backends persist studies and restore them by name."""

    def save(self, study: Study) -> None:  # pragma: no cover - protocol
        ...

    def load(self, name: str) -> Study:  # pragma: no cover - protocol
        ...


def json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _text(raw: Any) -> Any:
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def _write_value(group: h5py.Group, value: Any, comment: str | None) -> None:
    if isinstance(value, np.ndarray):
        group.attrs["kind"] = "ndarray"
        group.create_dataset("data", data=value)
    elif isinstance(value, pd.Series):
        group.attrs["kind"] = "pandas_series"
        group.attrs["value"] = value.to_json(orient="split")
        group.attrs["pandas_dtype"] = str(value.dtype)
    elif isinstance(value, pd.DataFrame):
        group.attrs["kind"] = "pandas_frame"
        group.attrs["value"] = value.to_json(orient="split")
        group.attrs["pandas_dtypes"] = json.dumps(
            {str(col): str(dt) for col, dt in value.dtypes.items()}
        )
    else:
        group.attrs["kind"] = "json"
        try:
            group.attrs["value"] = json.dumps(value, default=json_default)
        except TypeError as exc:
            raise StorageError(f"cannot store {group.name}: {exc}") from exc
    if comment is not None:
        group.attrs["comment"] = comment


def _read_value(group: h5py.Group) -> Any:
    kind = _text(group.attrs.get("kind", "json"))
    if kind == "ndarray":
        return np.array(group["data"][...])
    if kind == "pandas_series":
        value = pd.read_json(StringIO(_text(group.attrs["value"])), typ="series", orient="split")
        dtype = _text(group.attrs.get("pandas_dtype"))
        return value.astype(dtype) if dtype else value
    if kind == "pandas_frame":
        value = pd.read_json(StringIO(_text(group.attrs["value"])), orient="split")
        dtypes = _text(group.attrs.get("pandas_dtypes"))
        if dtypes:
            try:
                value = value.astype(json.loads(dtypes))
            except (TypeError, ValueError, KeyError):
                pass
        return value
    raw = _text(group.attrs["value"])
    try:
        return json.loads(raw)
    except (TypeError, ValueError):
        return raw


class HDF5StorageService:
    """Stores studies in one HDF5 file using :mod:`h5py`."""

    def __init__(self, file_path: str | Path) -> None:
        self._file_path = Path(file_path)

    @property
    def file_path(self) -> Path:
        return self._file_path

    def save(self, study: Study) -> None:
        """Write ``study``, replacing any stored study of the same name."""

        self._file_path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with h5py.File(self._file_path, "a") as h5:
                root = h5.require_group(HDF5_ROOT_GROUP)
                root.attrs["schema_version"] = SCHEMA_VERSION
                if study.name in root:
                    del root[study.name]
                group = root.create_group(study.name)
                params_group = group.create_group(HDF5_PARAMETERS_GROUP)
                results_group = group.create_group(HDF5_RESULTS_GROUP)
                runs_group = group.create_group(HDF5_RUNS_GROUP)

                for name, param in study.parameters.items():
                    _write_value(params_group.create_group(name), param.value, param.comment)
                for name, result in study.results.items():
                    _write_value(results_group.create_group(name), result.value, result.comment)
                for rec in study._run_records:
                    rg = runs_group.create_group(rec["id"])
                    rg.attrs["params"] = json.dumps(rec["params"], default=json_default)
                    rg.attrs["result_names"] = json.dumps(sorted(rec["results"]))
                    rg.attrs["timestamp"] = rec["timestamp"]
        except OSError as exc:
            raise StorageError(f"cannot write {self._file_path}: {exc}") from exc

    def load(self, name: str) -> Study:
        """Read a study back; run records are rebuilt from the ``by_run`` results."""

        try:
            h5 = h5py.File(self._file_path, "r")
        except OSError as exc:
            raise StorageError(f"cannot open {self._file_path}: {exc}") from exc
        with h5:
            root = h5.get(HDF5_ROOT_GROUP)
            if root is None or name not in root:
                raise StorageError(f"no study named {name!r} in {self._file_path}")
            group = root[name]
            study = Study(name=name)

            for param_name, g in group[HDF5_PARAMETERS_GROUP].items():
                study.add_parameter(
                    Parameter(param_name, _read_value(g), _text(g.attrs.get("comment")))
                )
            by_run: dict[str, Any] = {}
            for result_name, g in group[HDF5_RESULTS_GROUP].items():
                if result_name.startswith("by_run."):
                    by_run[result_name] = _read_value(g)
                else:
                    study.add_result(
                        Result(result_name, _read_value(g), _text(g.attrs.get("comment")))
                    )
            runs = group[HDF5_RUNS_GROUP]
            for run_id in sorted(runs):
                rg = runs[run_id]
                names = json.loads(_text(rg.attrs["result_names"]))
                results = {n: by_run[f"by_run.{run_id}.{n}"] for n in names}
                study.record_run(
                    run_id,
                    json.loads(_text(rg.attrs["params"])),
                    results,
                    timestamp=_text(rg.attrs["timestamp"]),
                )
        return study
