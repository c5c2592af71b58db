"""Run configuration for the command line.

A :class:`RunConfig` is assembled from an optional JSON config file and the
command-line flags; flags win. Kernel and model flags use the compact form
``family:key=value,key=value``, for example ``exp-pair:lambda=1,gamma=0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .asymptotic import REPRESENTATIONS
from .constants import DEFAULT_RESTARTS
from .exceptions import ConfigurationError
from .exploration import parse_n_range
from .kernel import KERNEL_FAMILIES, TriangularKernel, kernel_from_spec
from .model import MODEL_FAMILIES, RegressionModel, model_from_spec

COMMANDS = ("design", "dstar", "table", "finite-plan", "compare", "simulate")
FORMATS = ("json", "csv", "h5")


def _number(text: str) -> int | float:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"parameter value {text!r} is not a number") from None


def parse_family_spec(text: str) -> dict[str, Any]:
    """``"family:key=value,key=value"`` to ``{"family": ..., key: value}``."""

    family, _, rest = text.partition(":")
    if not family.strip():
        raise ConfigurationError(f"missing family in {text!r}")
    spec: dict[str, Any] = {"family": family.strip()}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"expected key=value, got {item!r} in {text!r}")
        spec[key.strip()] = _number(value.strip())
    return spec


def _check_kernel(spec: Mapping[str, Any]) -> dict[str, Any]:
    spec = dict(spec)
    family = spec.get("family")
    if family not in KERNEL_FAMILIES:
        raise ConfigurationError(
            f"unknown kernel family {family!r}; expected one of {sorted(KERNEL_FAMILIES)}"
        )
    _, required, optional = KERNEL_FAMILIES[family]
    params = [k for k in spec if k != "family"]
    unknown = [k for k in params if k not in required + optional]
    missing = [k for k in required if k not in spec]
    if unknown or missing:
        raise ConfigurationError(
            f"kernel {family}: unknown parameters {unknown}, missing parameters {missing}"
        )
    return spec


def _check_model(spec: Mapping[str, Any]) -> dict[str, Any]:
    spec = dict(spec)
    family = spec.get("family")
    if family not in MODEL_FAMILIES:
        raise ConfigurationError(
            f"unknown model family {family!r}; expected one of {sorted(MODEL_FAMILIES)}"
        )
    _, accepted = MODEL_FAMILIES[family]
    unknown = [k for k in spec if k != "family" and k not in accepted]
    if unknown:
        raise ConfigurationError(f"model {family}: unknown parameters {unknown}")
    return spec


@dataclass(frozen=True)
class RunConfig:
    """Everything one command needs.

    ``kernel`` and ``model`` are family specs without the interval, which is
    given by ``a`` and ``b``. ``n_range`` keeps its textual form so the config
    round-trips through :meth:`canonical`.
    """

    command: str
    kernel: Mapping[str, Any] = field(default_factory=lambda: {"family": "brownian"})
    model: Mapping[str, Any] = field(default_factory=lambda: {"family": "location"})
    a: float = 1.0
    b: float = 2.0
    n: int | None = None
    n_range: str | None = None
    representation: str = "diagonal"
    table: int | None = None
    plan: str | None = None
    out: str | None = None
    format: str = "json"
    seed: int = 0
    reps: int = 100_000
    restarts: int = DEFAULT_RESTARTS
    workers: int | None = None
    theta: tuple[float, ...] | None = None
    quad_rtol: float | None = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}; expected {COMMANDS}")
        object.__setattr__(self, "kernel", _check_kernel(self.kernel))
        object.__setattr__(self, "model", _check_model(self.model))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not self.a < self.b:
            raise ConfigurationError(f"need a < b, got [{self.a}, {self.b}]")
        if self.n is not None and self.n < 0:
            raise ConfigurationError("n must be non-negative")
        if self.n_range is not None:
            parse_n_range(self.n_range)
        if self.representation not in REPRESENTATIONS:
            raise ConfigurationError(f"representation must be one of {REPRESENTATIONS}")
        if self.format not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}")
        if self.reps < 2 or self.restarts < 1:
            raise ConfigurationError("reps must be at least 2 and restarts at least 1")
        if self.quad_rtol is not None and not self.quad_rtol > 0:
            raise ConfigurationError("quad_rtol must be positive")
        if self.theta is not None:
            object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))

    @property
    def n_values(self) -> list[int]:
        if self.n_range is not None:
            return parse_n_range(self.n_range)
        return [self.n if self.n is not None else 10]

    def build_kernel(self) -> TriangularKernel:
        return kernel_from_spec({**self.kernel, "a": self.a, "b": self.b})

    def build_model(self) -> RegressionModel:
        return model_from_spec(self.model, self.a, self.b)

    def canonical(self) -> dict[str, Any]:
        """Plain, key-sorted mapping; ``from_mapping(canonical())`` rebuilds this config."""

        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Mapping):
                value = dict(sorted(value.items()))
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return dict(sorted(out.items()))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys {unknown}")
        values = dict(mapping)
        for key in ("kernel", "model"):
            if isinstance(values.get(key), str):
                values[key] = parse_family_spec(values[key])
        if isinstance(values.get("kernel"), Mapping):
            # kernel specs may carry the interval themselves
            kernel = dict(values["kernel"])
            for end in ("a", "b"):
                if end in kernel:
                    values.setdefault(end, kernel.pop(end))
            values["kernel"] = kernel
        if values.get("theta") is not None:
            values["theta"] = tuple(values["theta"])
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return data


def merge_config(
    command: str, file_values: Mapping[str, Any], flag_values: Mapping[str, Any]
) -> RunConfig:
    """File values overridden by every flag that was given (not ``None``)."""

    merged = {**dict(file_values), **{k: v for k, v in flag_values.items() if v is not None}}
    merged["command"] = command
    return RunConfig.from_mapping(merged)
