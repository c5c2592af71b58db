"""Studies: named collections of parameters, results and per-run records.

A study is what a parameter sweep produces. Baseline parameters describe the
problem (kernel, model, interval), each run records the parameter values it
used together with the numbers it computed, and :meth:`Study.to_frame` lays
the runs out as a table.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Generic, MutableMapping, Optional, TypeVar

import numpy as np
import pandas as pd

T = TypeVar("T")


@dataclass(slots=True)
class Parameter(Generic[T]):
    """A named input of a study with an optional comment."""

    name: str
    value: T
    comment: Optional[str] = None


@dataclass(slots=True)
class Result(Generic[T]):
    """A named output of a study."""

    name: str
    value: T
    comment: Optional[str] = None


@dataclass
class Study:
    """In-memory container for one sweep.

    Parameters and results are kept in flat mappings keyed by name. Results of
    individual runs are mirrored as ``by_run.<run_id>.<name>`` so that they
    persist alongside the study-level results.
    """

    name: str
    _parameters: MutableMapping[str, Parameter[Any]] = field(default_factory=dict)
    _results: MutableMapping[str, Result[Any]] = field(default_factory=dict)
    _run_records: list[dict[str, Any]] = field(default_factory=list)

    # --- Parameters ---

    def add_parameter(self, parameter: Parameter[Any]) -> None:
        self._parameters[parameter.name] = parameter

    def set_parameter_values(self, values: Mapping[str, Any]) -> None:
        """Set or create parameters from a plain mapping."""

        for name, value in values.items():
            if name in self._parameters:
                self._parameters[name].value = value
            else:
                self._parameters[name] = Parameter(name=name, value=value)

    @property
    def parameters(self) -> Mapping[str, Parameter[Any]]:
        return dict(self._parameters)

    def parameter_values(self) -> dict[str, Any]:
        return {name: param.value for name, param in self._parameters.items()}

    # --- Results ---

    def add_result(self, result: Result[Any]) -> None:
        self._results[result.name] = result

    @property
    def results(self) -> Mapping[str, Result[Any]]:
        return dict(self._results)

    # --- Runs ---

    def record_run(
        self,
        run_id: str,
        params: Mapping[str, Any],
        results: Mapping[str, Any],
        timestamp: str | None = None,
    ) -> None:
        """Append a run snapshot and mirror its results under ``by_run``."""

        self._run_records.append(
            {
                "id": run_id,
                "params": dict(params),
                "results": dict(results),
                "timestamp": timestamp
                or datetime.now(timezone.utc).isoformat(timespec="seconds"),
            }
        )
        for name, value in results.items():
            namespaced = f"by_run.{run_id}.{name}"
            self._results[namespaced] = Result(name=namespaced, value=value)

    def list_runs(self) -> list[str]:
        return [r["id"] for r in self._run_records]

    def get_run_params(self, run_id: str) -> Mapping[str, Any]:
        for rec in self._run_records:
            if rec["id"] == run_id:
                return dict(rec["params"])
        return {}

    def get_run_results(self, run_id: str) -> Mapping[str, Any]:
        for rec in self._run_records:
            if rec["id"] == run_id:
                return dict(rec["results"])
        return {}

    def collect_runs(self, result_name: str) -> list[Any]:
        """Values of one result across runs, in run order; missing entries are skipped."""

        values: list[Any] = []
        for run_id in self.list_runs():
            key = f"by_run.{run_id}.{result_name}"
            if key in self._results:
                values.append(self._results[key].value)
        return values

    def to_frame(self) -> pd.DataFrame:
        """One row per run with its parameters and scalar results.

        Array-valued results are left out; they remain available through
        :meth:`get_run_results`.
        """

        rows = []
        for rec in self._run_records:
            row: dict[str, Any] = {"run": rec["id"], **rec["params"]}
            for name, value in rec["results"].items():
                if np.ndim(value) == 0:
                    row[name] = value
            rows.append(row)
        return pd.DataFrame(rows)
