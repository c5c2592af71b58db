"""Discrete signed and matrix-weighted designs on a finite set of points.

A signed design puts weights ``w_i`` of either sign on increasing points; the
weighted least squares estimator with ``W = diag(w)`` has variance
:func:`variance_functional`. The optimal weights turn that estimator into the
BLUE, which is what :func:`optimal_signed_weights` computes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .constants import VANISHING_TOL
from .covmat import apply_tridiagonal_inverse, build_sigma
from .estimators import EstimatorReport, design_matrix, mwe, one_column_matrices, wlse
from .exceptions import DegenerateDesignError, DomainError, InvalidModelError, SingularMatrixError
from .kernel import TriangularKernel
from .logging_utils import get_logger
from .model import RegressionModel

logger = get_logger("design")


def _canonical(weights: NDArray[np.float64]) -> NDArray[np.float64]:
    total = np.sum(np.abs(weights))
    if total == 0.0:
        raise DegenerateDesignError("all weights are zero")
    w = weights / total
    # round-off residue must not decide the sign
    nonzero = np.flatnonzero(np.abs(w) > 1e-12 * np.max(np.abs(w)))
    if w[nonzero[-1]] < 0:
        w = -w
    return w


@dataclass(frozen=True, eq=False)
class SignedDesign:
    """Signed weights on strictly increasing points."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        t = np.atleast_1d(np.asarray(self.points, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if t.shape != w.shape or t.ndim != 1 or t.size == 0:
            raise DomainError("points and weights must be matching non-empty vectors")
        if np.any(np.diff(t) <= 0):
            raise DomainError("design points must be strictly increasing")
        object.__setattr__(self, "points", t)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.points.size)

    def normalized(self) -> SignedDesign:
        """Weights scaled to ``sum |w| = 1`` with the last nonzero weight positive."""

        return SignedDesign(self.points, _canonical(self.weights))

    def scaled(self, c: float) -> SignedDesign:
        return SignedDesign(self.points, c * self.weights)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.points, "w": self.weights})

    def estimator(
        self, model: RegressionModel, kernel: TriangularKernel, Y: ArrayLike | None = None
    ) -> EstimatorReport:
        """The WLSE with ``W = diag(w)``."""

        cov = build_sigma(kernel, self.points)
        return wlse(design_matrix(model, cov.points), np.diag(self.weights), cov, Y)


@dataclass(frozen=True, eq=False)
class MatrixWeightedDesign:
    """Points with matrix weights ``O_j``; the design weights are ``O_j / N``."""

    points: NDArray[np.float64]
    matrices: NDArray[np.float64]

    def __post_init__(self) -> None:
        t = np.atleast_1d(np.asarray(self.points, dtype=float))
        O = np.asarray(self.matrices, dtype=float)
        if O.ndim != 3 or O.shape[0] != t.size or O.shape[1] != O.shape[2]:
            raise DomainError(f"expected {t.size} square weight matrices, got shape {O.shape}")
        if np.any(np.diff(t) <= 0):
            raise DomainError("design points must be strictly increasing")
        object.__setattr__(self, "points", t)
        object.__setattr__(self, "matrices", O)

    @property
    def n(self) -> int:
        return int(self.points.size)

    @property
    def m(self) -> int:
        return int(self.matrices.shape[1])

    @property
    def weights(self) -> NDArray[np.float64]:
        return self.matrices / self.n

    def columns(self, model: RegressionModel) -> NDArray[np.float64]:
        """The matrix ``C`` with columns ``O_j f(t_j)``."""

        return np.einsum("jkl,lj->kj", self.matrices, model(self.points))

    def information(self, model: RegressionModel) -> NDArray[np.float64]:
        """``M = sum_j O_j f(t_j) f(t_j)^T``."""

        return self.columns(model) @ design_matrix(model, self.points)

    def to_frame(self) -> pd.DataFrame:
        frame = {"t": self.points}
        for k in range(self.m):
            for l in range(self.m):
                frame[f"o_{k + 1}{l + 1}"] = self.matrices[:, k, l]
        return pd.DataFrame(frame)

    def estimator(
        self, model: RegressionModel, kernel: TriangularKernel, Y: ArrayLike | None = None
    ) -> EstimatorReport:
        return mwe(model, build_sigma(kernel, self.points), self.matrices, Y)


def variance_functional(
    design: SignedDesign, model: RegressionModel, kernel: TriangularKernel
) -> float:
    """Variance of the WLSE with weights ``w`` for a one-parameter model.

    ``sum_ij K(t_i, t_j) w_i w_j f(t_i) f(t_j) / (sum_i w_i f(t_i)**2)**2``.
    Unchanged when every weight is multiplied by the same nonzero constant.
    """

    if model.m != 1:
        raise InvalidModelError("the variance functional is defined for one-parameter models")
    f = model(design.points)[0]
    wf = design.weights * f
    denominator = float(wf @ f)
    if abs(denominator) <= VANISHING_TOL * max(1.0, float(np.abs(wf) @ np.abs(f))):
        raise DegenerateDesignError("sum of w f^2 vanishes")
    sigma = build_sigma(kernel, design.points).sigma
    return float(wf @ sigma @ wf) / denominator**2


def _support(
    model: RegressionModel, points: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if model.m != 1:
        raise InvalidModelError("signed weights need a one-parameter model")
    t = np.atleast_1d(np.asarray(points, dtype=float))
    f = model(t)[0]
    keep = np.abs(f) >= VANISHING_TOL
    if not np.any(keep):
        raise DegenerateDesignError("the regression function vanishes at every point")
    if not np.all(keep):
        logger.debug("dropping %d points where f vanishes", int(np.sum(~keep)))
    return t[keep], f[keep]


def optimal_signed_weights(
    model: RegressionModel, kernel: TriangularKernel, points: ArrayLike
) -> SignedDesign:
    """Weights ``w_i proportional to (Sigma^{-1} f)_i / f(t_i)`` by a dense solve.

    The weighted estimator of the result coincides with the BLUE on the same
    points. Points where ``f`` vanishes carry no information and are dropped.
    """

    t, f = _support(model, points)
    sigma = build_sigma(kernel, t).sigma
    try:
        x = scipy.linalg.solve(sigma, f, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"covariance matrix is singular: {exc}") from exc
    return SignedDesign(t, x / f).normalized()


def optimal_signed_weights_triangular(
    model: RegressionModel, kernel: TriangularKernel, points: ArrayLike
) -> SignedDesign:
    """Same weights as :func:`optimal_signed_weights` from the tridiagonal ``Sigma^{-1}``."""

    t, f = _support(model, points)
    return SignedDesign(t, apply_tridiagonal_inverse(kernel, t, f) / f).normalized()


def optimal_mwe_vectors(
    model: RegressionModel, kernel: TriangularKernel, points: ArrayLike
) -> MatrixWeightedDesign:
    """One-column weights ``O_j = omega_j e_1^T`` with ``omega_j = (X^T Sigma^{-1})_j / f_1(t_j)``.

    The resulting matrix-weighted estimator has the BLUE covariance.
    """

    t = np.atleast_1d(np.asarray(points, dtype=float))
    X = design_matrix(model, t)
    if np.any(np.abs(X[:, 0]) < VANISHING_TOL):
        raise InvalidModelError("f_1 vanishes at a support point")
    omegas = apply_tridiagonal_inverse(kernel, t, X) / X[:, :1]
    return MatrixWeightedDesign(t, one_column_matrices(omegas))


def design_points(kernel: TriangularKernel, n: int) -> NDArray[np.float64]:
    """``Q^{-1}((i - 1/2) / n)`` for ``i = 1, ..., n``."""

    if n < 1:
        raise DomainError("need at least one design point")
    return kernel.Q_inverse((np.arange(1, n + 1) - 0.5) / n)
