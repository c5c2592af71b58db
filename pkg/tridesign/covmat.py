"""Covariance matrices of triangular kernels and their inverses.

For points with strictly increasing ``q``-values the inverse of a triangular
kernel's covariance matrix is tridiagonal with entries available in closed
form. :func:`tridiagonal_bands` computes those entries in O(N); the dense LU
path exists for checking and for nearly tied points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

from .constants import Q_GAP_RTOL
from .exceptions import DomainError, FactorizationError, SingularMatrixError
from .kernel import TriangularKernel
from .logging_utils import get_logger

logger = get_logger("covmat")


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """``Sigma_ij = K(t_i, t_j)`` with the kernel values it was built from."""

    kernel: TriangularKernel
    points: NDArray[np.float64]
    u: NDArray[np.float64]
    v: NDArray[np.float64]
    q: NDArray[np.float64]
    sigma: NDArray[np.float64]

    @property
    def n(self) -> int:
        return int(self.points.size)


def _increasing_points(kernel: TriangularKernel, points: ArrayLike) -> NDArray[np.float64]:
    t = np.atleast_1d(np.asarray(points, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise DomainError("points must be a non-empty one-dimensional sequence")
    t = kernel.check_domain(t)
    if np.any(np.diff(t) <= 0):
        raise DomainError("points must be strictly increasing without duplicates")
    return t


def build_sigma(kernel: TriangularKernel, points: ArrayLike) -> CovarianceMatrix:
    t = _increasing_points(kernel, points)
    u, v = kernel.u(t), kernel.v(t)
    upper = np.triu(np.outer(u, v))
    sigma = upper + np.triu(upper, 1).T
    return CovarianceMatrix(kernel=kernel, points=t, u=u, v=v, q=u / v, sigma=sigma)


def tridiagonal_bands(
    u: NDArray[np.float64], v: NDArray[np.float64], q: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Main diagonal and first off-diagonal of ``Sigma^{-1}``.

    Raises :class:`SingularMatrixError` when two q-values are closer than
    ``1e-12`` times the q-span.
    """

    n = q.size
    if n == 1:
        return np.array([1.0 / (u[0] * v[0])]), np.empty(0)
    gaps = np.diff(q)
    if np.min(gaps) < Q_GAP_RTOL * (q[-1] - q[0]):
        raise SingularMatrixError("q-values are tied; closed-form inverse refused")
    off = -1.0 / (v[:-1] * v[1:] * gaps)
    diag = np.empty(n)
    diag[0] = u[1] / (u[0] * v[0] * v[1] * gaps[0])
    diag[-1] = 1.0 / (v[-1] ** 2 * gaps[-1])
    diag[1:-1] = (q[2:] - q[:-2]) / (v[1:-1] ** 2 * gaps[:-1] * gaps[1:])
    return diag, off


def tridiagonal_inverse(cov: CovarianceMatrix) -> sparse.csr_array:
    """Closed-form ``Sigma^{-1}`` as a sparse tridiagonal matrix."""

    diag, off = tridiagonal_bands(cov.u, cov.v, cov.q)
    if cov.n == 1:
        return sparse.csr_array(diag.reshape(1, 1))
    return sparse.diags_array([off, diag, off], offsets=[-1, 0, 1], format="csr")


def apply_tridiagonal_inverse(
    kernel: TriangularKernel, points: ArrayLike, values: ArrayLike
) -> NDArray[np.float64]:
    """``Sigma^{-1} @ values`` in O(N) without forming ``Sigma``.

    ``values`` has the points along its first axis.
    """

    t = _increasing_points(kernel, points)
    u, v = kernel.u(t), kernel.v(t)
    diag, off = tridiagonal_bands(u, v, u / v)
    x = np.asarray(values, dtype=float)
    if x.shape[0] != t.size:
        raise DomainError(f"expected {t.size} rows, got {x.shape[0]}")
    d = diag.reshape((-1,) + (1,) * (x.ndim - 1))
    e = off.reshape((-1,) + (1,) * (x.ndim - 1))
    out = d * x
    out[:-1] += e * x[1:]
    out[1:] += e * x[:-1]
    return out


def dense_inverse(cov: CovarianceMatrix) -> NDArray[np.float64]:
    """``Sigma^{-1}`` through a pivoted LU factorization."""

    lu, piv = scipy.linalg.lu_factor(cov.sigma, check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        raise SingularMatrixError("covariance matrix is singular")
    return scipy.linalg.lu_solve((lu, piv), np.eye(cov.n))


def precision(cov: CovarianceMatrix) -> sparse.csr_array | NDArray[np.float64]:
    """``Sigma^{-1}``, tridiagonal when possible and dense otherwise."""

    try:
        return tridiagonal_inverse(cov)
    except SingularMatrixError:
        logger.warning("nearly tied q-values at %d points; using dense inverse", cov.n)
        return dense_inverse(cov)


def cholesky_factor(cov: CovarianceMatrix) -> NDArray[np.float64]:
    """Lower-triangular ``L`` with ``L @ L.T == Sigma``."""

    try:
        return scipy.linalg.cholesky(cov.sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"covariance matrix is not positive definite: {exc}") from exc
