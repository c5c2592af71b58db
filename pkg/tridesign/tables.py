"""Reference tables of limiting optimal designs.

Each table fixes one regression model and lists, per kernel family, the
normalized endpoint masses and density of the limiting design on ``[1, 2]``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import pandas as pd

from .asymptotic import LimitingDesign, limiting_design
from .exceptions import ConfigurationError
from .kernel import TriangularKernel, affine_pair, brownian, exp_pair, power_pair
from .model import RegressionModel, linear, location, quadratic, trig

TABLE_INTERVAL = (1.0, 2.0)

TABLE_MODELS: dict[int, Callable[[float, float], RegressionModel]] = {
    1: location,
    2: linear,
    3: lambda a, b: quadratic(1.0, a, b),
    4: trig,
}

TABLE_KERNELS: dict[str, Callable[[float, float], TriangularKernel]] = {
    "brownian": brownian,
    "affine-plus": lambda a, b: affine_pair(0.5, 1.0, 1, a, b),
    "affine-minus": lambda a, b: affine_pair(1.0, 3.0, -1, a, b),
    "power": lambda a, b: power_pair(2.0, 1.0, a, b),
    "exp-v1": lambda a, b: exp_pair(1.0, 0.0, a, b),
    "exp": lambda a, b: exp_pair(1.0, 1.0, a, b),
}


def table_designs(number: int) -> dict[str, tuple[TriangularKernel, LimitingDesign]]:
    """Kernel and normalized limiting design for every row of a table."""

    if number not in TABLE_MODELS:
        raise ConfigurationError(f"unknown table {number}; expected one of {sorted(TABLE_MODELS)}")
    a, b = TABLE_INTERVAL
    model = TABLE_MODELS[number](a, b)
    rows = {}
    for label, build in TABLE_KERNELS.items():
        kernel = build(a, b)
        rows[label] = (kernel, limiting_design(model, kernel))
    return rows


def table_frame(number: int, samples: int = 11) -> pd.DataFrame:
    """Long-format table: one row per (kernel, quantity, t)."""

    records = []
    for label, (_, design) in table_designs(number).items():
        records.append((number, label, "P_a", design.a, design.mass_a))
        records.append((number, label, "P_b", design.b, design.mass_b))
        for t, p in design.density_samples(samples):
            records.append((number, label, "p", float(t), float(p)))
    columns = ["table", "kernel", "quantity", "t", "value"]
    frame = pd.DataFrame.from_records(records, columns=columns)
    frame["value"] = frame["value"].where(np.abs(frame["value"]) > 1e-15, 0.0)
    return frame
