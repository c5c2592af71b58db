"""Linear unbiased estimators and their exact covariance matrices.

Every estimator here is linear in the observations, ``theta_hat = A @ Y``.
The operator ``A`` is kept on the :class:`EstimatorReport`, so the covariance
``A Sigma A^T`` and Monte Carlo replicates come from the same object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .constants import CONDITION_MAX, LOEWNER_TOL, VANISHING_TOL
from .covmat import CovarianceMatrix, precision
from .exceptions import DomainError, InvalidModelError, SingularMatrixError
from .model import RegressionModel


@dataclass(frozen=True, eq=False)
class EstimatorReport:
    """Result of applying a linear estimator on a set of points.

    ``estimate`` is ``None`` when no observations were supplied.
    """

    kind: str
    points: NDArray[np.float64]
    operator: NDArray[np.float64]
    covariance: NDArray[np.float64]
    estimate: NDArray[np.float64] | None = None

    @property
    def m(self) -> int:
        return int(self.covariance.shape[0])

    @property
    def variance(self) -> float:
        """The scalar variance of a one-parameter estimator."""

        if self.m != 1:
            raise DomainError("variance is defined for one-parameter estimators only")
        return float(self.covariance[0, 0])


def design_matrix(model: RegressionModel, points: ArrayLike) -> NDArray[np.float64]:
    """The ``N x m`` matrix with rows ``f(t_i)``."""

    return np.asarray(model(np.atleast_1d(np.asarray(points, dtype=float))).T)


def _as_rows(X: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(X, dtype=float)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def _solve(normal: NDArray[np.float64], rhs: NDArray[np.float64], what: str) -> NDArray[np.float64]:
    if not np.all(np.isfinite(normal)) or np.linalg.cond(normal) > CONDITION_MAX:
        raise SingularMatrixError(f"{what} is singular or nearly singular")
    try:
        return scipy.linalg.solve(normal, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{what} is singular: {exc}") from exc


def _report(
    kind: str,
    A: NDArray[np.float64],
    cov: CovarianceMatrix,
    Y: ArrayLike | None,
    covariance: NDArray[np.float64] | None = None,
) -> EstimatorReport:
    if covariance is None:
        covariance = A @ cov.sigma @ A.T
    covariance = 0.5 * (covariance + covariance.T)
    estimate = None if Y is None else A @ np.asarray(Y, dtype=float)
    return EstimatorReport(
        kind=kind, points=cov.points, operator=A, covariance=covariance, estimate=estimate
    )


def _weighted_transpose(X: NDArray[np.float64], W: ArrayLike) -> NDArray[np.float64]:
    """``X^T W`` for dense or sparse ``W``."""

    return np.asarray(W.T @ X).T  # type: ignore[union-attr]


def wlse(
    X: ArrayLike,
    W: ArrayLike,
    cov: CovarianceMatrix,
    Y: ArrayLike | None = None,
    kind: str = "wlse",
) -> EstimatorReport:
    """Weighted least squares ``(X^T W X)^{-1} X^T W Y``.

    The covariance is ``(X^T W X)^{-1} X^T W Sigma W^T X (X^T W^T X)^{-1}``.
    """

    X = _as_rows(X)
    if not hasattr(W, "T"):
        W = np.asarray(W, dtype=float)
    XtW = _weighted_transpose(X, W)
    A = _solve(XtW @ X, XtW, "X^T W X")
    return _report(kind, A, cov, Y)


def olse(X: ArrayLike, cov: CovarianceMatrix, Y: ArrayLike | None = None) -> EstimatorReport:
    return wlse(X, np.eye(cov.n), cov, Y, kind="olse")


def blue(X: ArrayLike, cov: CovarianceMatrix, Y: ArrayLike | None = None) -> EstimatorReport:
    """Best linear unbiased estimator using the tridiagonal ``Sigma^{-1}``."""

    X = _as_rows(X)
    XtP = _weighted_transpose(X, precision(cov))
    info = XtP @ X
    A = _solve(info, XtP, "X^T Sigma^{-1} X")
    covariance = _solve(info, np.eye(info.shape[0]), "X^T Sigma^{-1} X")
    return _report("blue", A, cov, Y, covariance=covariance)


def slse(
    X: ArrayLike, signs: ArrayLike, cov: CovarianceMatrix, Y: ArrayLike | None = None
) -> EstimatorReport:
    """Signed least squares: weights ``+1`` and ``-1`` on the diagonal."""

    s = np.asarray(signs, dtype=float)
    if s.shape != (cov.n,) or not np.all(np.abs(s) == 1.0):
        raise DomainError("signs must be a vector of +1 and -1, one per point")
    return wlse(X, np.diag(s), cov, Y, kind="slse")


def mwe_from_columns(
    X: ArrayLike,
    C: ArrayLike,
    cov: CovarianceMatrix,
    Y: ArrayLike | None = None,
    kind: str = "mwe",
) -> EstimatorReport:
    """Matrix-weighted estimator ``M^{-1} C Y`` with ``M = C X``."""

    X = _as_rows(X)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    A = _solve(C @ X, C, "information matrix M")
    return _report(kind, A, cov, Y)


def weight_columns(X: NDArray[np.float64], matrices: ArrayLike) -> NDArray[np.float64]:
    """``C`` with columns ``O_j f(t_j)``."""

    O = np.asarray(matrices, dtype=float)
    return np.einsum("jkl,jl->kj", O, _as_rows(X))


def mwe(
    model: RegressionModel,
    cov: CovarianceMatrix,
    matrices: ArrayLike,
    Y: ArrayLike | None = None,
) -> EstimatorReport:
    X = design_matrix(model, cov.points)
    O = np.asarray(matrices, dtype=float)
    if O.shape != (cov.n, model.m, model.m):
        raise DomainError(f"expected weights of shape {(cov.n, model.m, model.m)}, got {O.shape}")
    return mwe_from_columns(X, weight_columns(X, O), cov, Y)


def _nonvanishing(values: NDArray[np.float64], what: str) -> None:
    if np.any(np.abs(values) < VANISHING_TOL):
        raise InvalidModelError(f"{what} vanishes at a support point")


def one_column_weights(
    model: RegressionModel, cov: CovarianceMatrix, W: ArrayLike
) -> NDArray[np.float64]:
    """Vectors ``omega_j = (X^T W)_j / f_1(t_j)``, one row per point."""

    X = design_matrix(model, cov.points)
    _nonvanishing(X[:, 0], "f_1")
    return (_weighted_transpose(X, W) / X[:, 0]).T


def diagonal_weights(
    model: RegressionModel, cov: CovarianceMatrix, W: ArrayLike
) -> NDArray[np.float64]:
    """Diagonals ``(O_j)_kk = (X^T W)_kj / f_k(t_j)``, one row per point."""

    X = design_matrix(model, cov.points)
    _nonvanishing(X, "a regression function")
    return _weighted_transpose(X, W).T / X


def one_column_matrices(omegas: ArrayLike) -> NDArray[np.float64]:
    w = np.atleast_2d(np.asarray(omegas, dtype=float))
    n, m = w.shape
    O = np.zeros((n, m, m))
    O[:, :, 0] = w
    return O


def diagonal_matrices(diagonals: ArrayLike) -> NDArray[np.float64]:
    d = np.atleast_2d(np.asarray(diagonals, dtype=float))
    n, m = d.shape
    O = np.zeros((n, m, m))
    idx = np.arange(m)
    O[:, idx, idx] = d
    return O


def loewner_leq(
    lower: ArrayLike, upper: ArrayLike, tol: float = LOEWNER_TOL
) -> bool:
    """True when ``upper - lower`` is positive semidefinite up to ``tol``."""

    lo, up = np.atleast_2d(lower), np.atleast_2d(upper)
    diff = up - lo
    scale = max(1.0, float(np.max(np.abs(up))))
    return bool(np.min(np.linalg.eigvalsh(0.5 * (diff + diff.T))) >= -tol * scale)
