"""Finite ``(N + 2)``-point plans approximating limiting designs.

A scalar plan keeps the endpoint atoms as weights ``N P_a`` and ``N P_b`` and
replaces the density by ``N`` interior points at the quantiles of ``|p|``,
each carrying ``s_i P`` with ``s_i = sign(p(t_i))``. Matrix plans do the same
per parameter direction, using deterministic thinning when the directions
have different densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from .asymptotic import LimitingDesign, MatrixLimitingDesign
from .constants import DENSITY_ZERO_RTOL, VALIDATION_GRID
from .covmat import build_sigma
from .design import MatrixWeightedDesign, SignedDesign
from .estimators import EstimatorReport, design_matrix, mwe_from_columns, weight_columns, wlse
from .exceptions import DomainError, StorageError
from .kernel import TriangularKernel
from .logging_utils import get_logger
from .model import RegressionModel
from .quadrature import CumulativeDistribution, Integrand, integrate, sign_changes

logger = get_logger("discretize")

# Published four-point comparison design for the trigonometric example.
TRIG_COMPARISON_POINTS: tuple[float, ...] = (1.0, 1.25, 1.63, 2.0)

_PROPORTIONAL_RTOL = 1e-9


def quantile_points(
    density: Integrand,
    a: float,
    b: float,
    n: int,
    breakpoints: Sequence[float] = (),
) -> NDArray[np.float64]:
    """``F^{-1}(i / (n + 1))`` for ``i = 1, ..., n`` where ``F`` integrates ``|density|``.

    Where ``F`` is flat the smallest preimage is used.
    """

    if n < 0:
        raise DomainError("number of interior points must be non-negative")
    if n == 0:
        return np.empty(0)
    cdf = CumulativeDistribution(
        lambda t: np.abs(density(t)), a, b, breakpoints=breakpoints
    )
    return cdf.inverse(np.arange(1, n + 1) / (n + 1))


def _equidistant(a: float, b: float, n: int) -> NDArray[np.float64]:
    return a + np.arange(1, n + 1) * (b - a) / (n + 1)


# Scalar plans --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteDesignPlan:
    """Points ``{a, t_1, ..., t_N, b}`` with ``W_N = diag(weights)``."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]
    signs: NDArray[np.float64]
    mass_a: float
    mass_b: float
    interior: float
    degenerate: bool = False

    @property
    def n(self) -> int:
        return int(self.signs.size)

    @property
    def W(self) -> NDArray[np.float64]:
        return np.diag(self.weights)

    def design(self) -> SignedDesign:
        return SignedDesign(self.points, self.weights)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.points, "w": self.weights})

    def estimator(
        self, model: RegressionModel, kernel: TriangularKernel, Y: ArrayLike | None = None
    ) -> EstimatorReport:
        cov = build_sigma(kernel, self.points)
        return wlse(design_matrix(model, cov.points), self.W, cov, Y)


def finite_plan(limiting: LimitingDesign, n: int) -> FiniteDesignPlan:
    """The ``(n + 2)``-point plan of a limiting design.

    A design whose total variation is not one is rescaled first, keeping its
    sign. Without interior mass the interior points are equidistant and
    weightless.
    """

    if n < 0:
        raise DomainError("number of interior points must be non-negative")
    total = limiting.total_variation
    if abs(total - 1.0) > 1e-9:
        limiting = limiting.scaled(1.0 / total)
    a, b = limiting.a, limiting.b
    pa, pb = limiting.mass_a, limiting.mass_b
    interior = max(0.0, 1.0 - abs(pa) - abs(pb))

    if n == 0:
        return FiniteDesignPlan(
            points=np.array([a, b]),
            weights=np.array([pa, pb]),
            signs=np.empty(0),
            mass_a=pa,
            mass_b=pb,
            interior=interior,
            degenerate=not limiting.has_density,
        )

    degenerate = interior <= DENSITY_ZERO_RTOL or not limiting.has_density
    if degenerate:
        logger.debug("design has no interior mass; interior points get zero weight")
        inner = _equidistant(a, b, n)
        signs = np.zeros(n)
    else:
        inner = quantile_points(limiting.density, a, b, n, limiting.breakpoints)
        signs = np.sign(limiting.density(inner))
    weights = np.concatenate(([n * pa], signs * interior, [n * pb]))
    return FiniteDesignPlan(
        points=np.concatenate(([a], inner, [b])),
        weights=weights,
        signs=signs,
        mass_a=pa,
        mass_b=pb,
        interior=interior,
        degenerate=degenerate,
    )


# Matrix plans --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MatrixFinitePlan:
    """Points with diagonal matrix weights built from a limiting matrix design.

    ``signs`` has one row per interior point and one column per direction with
    entries in ``{-1, 0, 1}``; ``scale`` holds the diagonal of ``P``.
    """

    points: NDArray[np.float64]
    matrices: NDArray[np.float64]
    signs: NDArray[np.float64]
    scale: NDArray[np.float64]
    proportional: bool

    @property
    def n(self) -> int:
        return int(self.signs.shape[0])

    @property
    def m(self) -> int:
        return int(self.matrices.shape[1])

    def design(self) -> MatrixWeightedDesign:
        return MatrixWeightedDesign(self.points, self.matrices)

    def columns(self, model: RegressionModel) -> NDArray[np.float64]:
        return weight_columns(design_matrix(model, self.points), self.matrices)

    def to_frame(self) -> pd.DataFrame:
        frame = {"t": self.points}
        for k in range(self.m):
            frame[f"w_{k + 1}"] = self.matrices[:, k, k]
        return pd.DataFrame(frame)

    def estimator(
        self, model: RegressionModel, kernel: TriangularKernel, Y: ArrayLike | None = None
    ) -> EstimatorReport:
        cov = build_sigma(kernel, self.points)
        X = design_matrix(model, cov.points)
        return mwe_from_columns(X, weight_columns(X, self.matrices), cov, Y)


def _diagonal_plan_matrices(
    atom_a: NDArray[np.float64],
    atom_b: NDArray[np.float64],
    diagonals: NDArray[np.float64],
) -> NDArray[np.float64]:
    m = atom_a.shape[0]
    interior = np.zeros((diagonals.shape[0], m, m))
    idx = np.arange(m)
    interior[:, idx, idx] = diagonals
    return np.concatenate((atom_a[None], interior, atom_b[None]))


def _is_proportional(rows: NDArray[np.float64]) -> bool:
    unit = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    return bool(np.all(np.abs(unit @ unit[0]) >= 1.0 - _PROPORTIONAL_RTOL))


def _thin(values: NDArray[np.float64], peak: float) -> NDArray[np.float64]:
    """Deterministic error-diffusion thinning of one direction.

    A point is kept when the accumulated acceptance ratio ``|O_kk| / peak``
    crosses one; kept points carry the sign of ``O_kk``.
    """

    signs = np.zeros(values.size)
    acc = 0.5
    for j, value in enumerate(values):
        acc += abs(value) / peak
        if acc >= 1.0:
            signs[j] = np.sign(value)
            acc -= 1.0
    return signs


def matrix_finite_plan(limiting: MatrixLimitingDesign, n: int) -> MatrixFinitePlan:
    """Finite plan for a diagonal matrix design.

    Proportional diagonal densities share the quantile support of the first
    active direction. Otherwise the support is equidistant and each direction
    keeps a thinned subset of it. ``P_kk = n int |O_kk| / #{j : s_jk != 0}``.
    """

    if limiting.representation != "diagonal":
        raise DomainError("finite matrix plans need the diagonal representation")
    if n < 0:
        raise DomainError("number of interior points must be non-negative")
    a, b, m = limiting.a, limiting.b, limiting.m
    atom_a, atom_b = np.diag(np.diag(limiting.mass_a)), np.diag(np.diag(limiting.mass_b))

    if n == 0:
        return MatrixFinitePlan(
            points=np.array([a, b]),
            matrices=np.stack([limiting.mass_a, limiting.mass_b]),
            signs=np.empty((0, m)),
            scale=np.zeros(m),
            proportional=True,
        )

    grid = np.linspace(a, b, VALIDATION_GRID + 1)
    sampled = limiting.diagonal_density(grid)
    peaks = np.max(np.abs(sampled), axis=1)
    active = peaks > DENSITY_ZERO_RTOL * max(float(np.max(peaks)), 1.0)

    if not np.any(active):
        logger.debug("matrix design has no interior density; atoms only")
        signs = np.zeros((n, m))
        inner = _equidistant(a, b, n)
        proportional = True
    else:
        proportional = _is_proportional(sampled[active])
        if proportional:
            ref = int(np.flatnonzero(active)[0])

            def reference(t: NDArray[np.float64]) -> NDArray[np.float64]:
                return limiting.diagonal_density(t)[ref]

            inner = quantile_points(reference, a, b, n, sign_changes(reference, a, b))
            signs = np.where(active, np.sign(limiting.diagonal_density(inner).T), 0.0)
        else:
            inner = _equidistant(a, b, n)
            values = limiting.diagonal_density(inner)
            signs = np.zeros((n, m))
            for k in np.flatnonzero(active):
                signs[:, k] = _thin(values[k], float(peaks[k]))

    scale = np.zeros(m)
    counts = np.sum(np.abs(signs), axis=0)
    for k in np.flatnonzero(counts):

        def magnitude(t: NDArray[np.float64], k: int = int(k)) -> NDArray[np.float64]:
            return np.abs(limiting.diagonal_density(t)[k])

        breaks = sign_changes(lambda t, k=int(k): limiting.diagonal_density(t)[k], a, b)
        scale[k] = n * float(integrate(magnitude, a, b, breakpoints=breaks)) / counts[k]

    matrices = _diagonal_plan_matrices(n * atom_a, n * atom_b, signs * scale)
    return MatrixFinitePlan(
        points=np.concatenate(([a], inner, [b])),
        matrices=matrices,
        signs=signs,
        scale=scale,
        proportional=proportional,
    )


# Evaluation and persistence ------------------------------------------------

Plan = Union[FiniteDesignPlan, MatrixFinitePlan]


def plan_variance(
    plan: Plan, model: RegressionModel, kernel: TriangularKernel
) -> float | NDArray[np.float64]:
    """Exact covariance of the plan's weighted estimator; a float for one parameter."""

    covariance = plan.estimator(model, kernel).covariance
    return float(covariance[0, 0]) if covariance.shape == (1, 1) else covariance


def load_plan(path: str | Path) -> SignedDesign | MatrixWeightedDesign:
    """Read a plan or design written by ``to_frame().to_csv``.

    Columns ``t, w`` give a signed design, ``t, w_1, ..., w_m`` diagonal matrix
    weights and ``t, o_11, ..., o_mm`` full matrix weights.
    """

    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as exc:
        raise StorageError(f"cannot read plan {path}: {exc}") from exc
    if "t" not in frame.columns:
        raise StorageError(f"plan {path} has no 't' column")
    t = frame["t"].to_numpy(dtype=float)
    cols = [c for c in frame.columns if c != "t"]
    if cols == ["w"]:
        return SignedDesign(t, frame["w"].to_numpy(dtype=float))
    if cols and all(c.startswith("w_") for c in cols):
        diagonals = frame[sorted(cols, key=lambda c: int(c[2:]))].to_numpy(dtype=float)
        m = diagonals.shape[1]
        O = np.zeros((t.size, m, m))
        O[:, np.arange(m), np.arange(m)] = diagonals
        return MatrixWeightedDesign(t, O)
    if cols and all(c.startswith("o_") for c in cols):
        m = int(round(np.sqrt(len(cols))))
        if m * m != len(cols):
            raise StorageError(f"plan {path} has {len(cols)} matrix columns")
        ordered = [f"o_{k + 1}{l + 1}" for k in range(m) for l in range(m)]
        return MatrixWeightedDesign(t, frame[ordered].to_numpy(dtype=float).reshape(-1, m, m))
    raise StorageError(f"plan {path} has unrecognized columns {cols}")
