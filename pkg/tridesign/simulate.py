"""Monte Carlo checks of estimator covariances and an exact-design baseline.

Noise is drawn in blocks; block ``k`` of a run with seed ``s`` always uses the
Philox stream keyed by ``(s, k)``, so the result does not depend on how many
worker threads process the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize
from scipy.special import expit, logit

from .asymptotic import psi
from .constants import DEFAULT_RESTARTS, MC_BLOCK_SIZE
from .covmat import build_sigma, cholesky_factor
from .design import design_points
from .estimators import EstimatorReport, blue, design_matrix
from .exceptions import DegenerateDesignError, DomainError, TriDesignError
from .kernel import TriangularKernel
from .logging_utils import get_logger
from .model import RegressionModel

logger = get_logger("simulate")


class HasEstimator(Protocol):
    def estimator(
        self, model: RegressionModel, kernel: TriangularKernel, Y: ArrayLike | None = None
    ) -> EstimatorReport: ...


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block of replicates."""

    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def sample_gp(
    kernel: TriangularKernel, points: ArrayLike, seed: int, size: int | None = None
) -> NDArray[np.float64]:
    """Zero-mean Gaussian noise with covariance ``K`` on ``points``.

    Returns one vector, or ``size`` rows when ``size`` is given.
    """

    L = cholesky_factor(build_sigma(kernel, points))
    rng = block_generator(seed, 0)
    n = L.shape[0]
    z = rng.standard_normal(n if size is None else (size, n))
    return z @ L.T


@dataclass(frozen=True, eq=False)
class SimulationReport:
    """Empirical mean and covariance of an estimator next to its exact covariance."""

    reps: int
    seed: int
    theta: NDArray[np.float64]
    mean: NDArray[np.float64]
    covariance: NDArray[np.float64]
    analytic_covariance: NDArray[np.float64]
    covariance_se: NDArray[np.float64]
    mean_se: NDArray[np.float64]

    def covariance_within(self, k: float = 3.0) -> bool:
        gap = np.abs(self.covariance - self.analytic_covariance)
        return bool(np.all(gap <= k * self.covariance_se))

    def mean_within(self, k: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.mean - self.theta) <= k * self.mean_se))

    def to_dict(self) -> dict[str, Any]:
        return {
            "reps": self.reps,
            "seed": self.seed,
            "theta": self.theta.tolist(),
            "mean": self.mean.tolist(),
            "mean_se": self.mean_se.tolist(),
            "covariance": self.covariance.tolist(),
            "covariance_se": self.covariance_se.tolist(),
            "analytic_covariance": self.analytic_covariance.tolist(),
            "covariance_within_3se": self.covariance_within(),
            "mean_within_3se": self.mean_within(),
        }


def monte_carlo_variance(
    target: EstimatorReport | HasEstimator,
    model: RegressionModel,
    kernel: TriangularKernel,
    theta: ArrayLike,
    reps: int,
    seed: int,
    *,
    workers: int | None = None,
    block_size: int = MC_BLOCK_SIZE,
) -> SimulationReport:
    """Simulate ``Y = X theta + eps`` ``reps`` times and apply the estimator.

    ``target`` is an estimator report or anything with an ``estimator``
    method (designs and finite plans).
    """

    if reps < 2:
        raise DomainError("need at least two replicates")
    report = target if isinstance(target, EstimatorReport) else target.estimator(model, kernel)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (model.m,):
        raise DomainError(f"theta must have {model.m} entries")

    A = report.operator
    L = cholesky_factor(build_sigma(kernel, report.points))
    center = A @ (design_matrix(model, report.points) @ theta)
    loading = A @ L
    sizes = [min(block_size, reps - start) for start in range(0, reps, block_size)]

    def run_block(block: int) -> NDArray[np.float64]:
        z = block_generator(seed, block).standard_normal((sizes[block], L.shape[0]))
        return center + z @ loading.T

    with ThreadPoolExecutor(max_workers=workers) as ex:
        estimates = np.vstack(list(ex.map(run_block, range(len(sizes)))))

    mean = estimates.mean(axis=0)
    centered = estimates - mean
    covariance = centered.T @ centered / (reps - 1)
    products = np.einsum("rk,rl->rkl", centered, centered)
    covariance_se = products.std(axis=0, ddof=1) / np.sqrt(reps)
    mean_se = np.sqrt(np.diag(covariance) / reps)
    logger.debug("simulated %d replicates in %d blocks", reps, len(sizes))
    return SimulationReport(
        reps=reps,
        seed=seed,
        theta=theta,
        mean=mean,
        covariance=covariance,
        analytic_covariance=report.covariance,
        covariance_se=covariance_se,
        mean_se=mean_se,
    )


# Exact-design baseline -----------------------------------------------------


@dataclass(frozen=True)
class OptimizedDesign:
    """Best point set found; ``converged`` is False when no restart converged."""

    points: NDArray[np.float64]
    value: float
    converged: bool


def blue_criterion(model: RegressionModel, kernel: TriangularKernel, points: ArrayLike) -> float:
    """BLUE variance, or ``det(D)**(1/m)`` for several parameters."""

    covariance = blue(design_matrix(model, points), build_sigma(kernel, points)).covariance
    return float(covariance[0, 0]) if model.m == 1 else psi(covariance)


def optimize_exact_blue_design(
    model: RegressionModel,
    kernel: TriangularKernel,
    n_points: int,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    initial: Sequence[float] | None = None,
) -> OptimizedDesign:
    """Nelder-Mead search for BLUE-optimal points.

    With two or more points the endpoints are fixed and the interior points
    move through ``t = a + (b - a) expit(x)``; a single point moves freely.
    The first start uses ``initial`` (interior points only when pinned) or
    :func:`tridesign.design.design_points`; the others are random.
    """

    if n_points < max(1, model.m):
        raise DomainError(f"need at least {max(1, model.m)} points")
    a, b = kernel.a, kernel.b
    pinned = n_points >= 2
    free = n_points - 2 if pinned else 1

    def assemble(x: NDArray[np.float64]) -> NDArray[np.float64]:
        inner = np.sort(a + (b - a) * expit(x))
        return np.concatenate(([a], inner, [b])) if pinned else inner

    def objective(x: NDArray[np.float64]) -> float:
        t = assemble(x)
        if np.any(np.diff(t) <= 1e-12 * (b - a)):
            return np.inf
        try:
            return blue_criterion(model, kernel, t)
        except TriDesignError:
            return np.inf

    if free == 0:
        value = blue_criterion(model, kernel, [a, b])
        return OptimizedDesign(points=np.array([a, b]), value=value, converged=True)

    first = np.asarray(initial if initial is not None else design_points(kernel, free), dtype=float)
    if first.shape != (free,):
        raise DomainError(f"initial points must have {free} entries")
    rng = block_generator(seed, 0)
    starts = [first] + [np.sort(rng.uniform(a, b, free)) for _ in range(max(0, restarts - 1))]

    best_x, best_value, converged = None, np.inf, False
    for i, start in enumerate(starts):
        x0 = logit(np.clip((start - a) / (b - a), 1e-9, 1.0 - 1e-9))
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000 * free},
        )
        logger.debug("restart %d: value %.10g, success %s", i, res.fun, res.success)
        if res.fun < best_value:
            best_x, best_value, converged = res.x, float(res.fun), bool(res.success)
    if best_x is None:
        raise DegenerateDesignError("no feasible starting design")
    if not converged:
        logger.warning("Nelder-Mead did not converge; returning the best iterate")
    return OptimizedDesign(points=assemble(best_x), value=best_value, converged=converged)
