"""Composite Gauss-Legendre quadrature.

Integrands take a one-dimensional array of nodes and return an array whose
last axis runs over those nodes, so vector- and matrix-valued integrals cost a
single call per refinement level. Panels are doubled until two successive
levels agree.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .constants import (
    CDF_CELL_ORDER,
    CDF_CELLS,
    GL_ORDER,
    QUAD_MAX_DOUBLINGS,
    QUAD_RTOL,
    TRIANGLE_MAX_DOUBLINGS,
)
from .exceptions import DegenerateDesignError, DomainError, QuadratureError
from .logging_utils import get_logger

logger = get_logger("quadrature")

Integrand = Callable[[NDArray[np.float64]], NDArray[np.float64]]

_RTOL: ContextVar[float] = ContextVar("quad_rtol", default=QUAD_RTOL)


@contextmanager
def quad_tolerance(rtol: float | None) -> Iterator[None]:
    """Use ``rtol`` as the default relative tolerance inside the block."""

    if rtol is None:
        yield
        return
    if not rtol > 0:
        raise DomainError("quadrature tolerance must be positive")
    token = _RTOL.set(float(rtol))
    try:
        yield
    finally:
        _RTOL.reset(token)


@lru_cache(maxsize=8)
def _rule(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return leggauss(order)


def _edges(a: float, b: float, breakpoints: Sequence[float]) -> NDArray[np.float64]:
    inner = [float(p) for p in breakpoints if a < p < b]
    return np.unique(np.concatenate(([a], inner, [b])))


def composite_rule(
    edges: NDArray[np.float64], panels: int, order: int = GL_ORDER
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Nodes and weights with ``panels`` equal panels inside each segment."""

    x, w = _rule(order)
    cuts = np.concatenate(
        [np.linspace(lo, hi, panels + 1)[:-1] for lo, hi in zip(edges[:-1], edges[1:])]
        + [edges[-1:]]
    )
    mid = 0.5 * (cuts[1:] + cuts[:-1])
    half = 0.5 * (cuts[1:] - cuts[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _converged(value: NDArray[np.float64], previous: NDArray[np.float64], rtol: float) -> bool:
    return bool(np.max(np.abs(value - previous)) <= rtol * max(1.0, float(np.max(np.abs(value)))))


def _finish(value: NDArray[np.float64]) -> NDArray[np.float64] | float:
    return float(value) if np.ndim(value) == 0 else value


def integrate(
    func: Integrand,
    a: float,
    b: float,
    *,
    breakpoints: Sequence[float] = (),
    rtol: float | None = None,
    order: int = GL_ORDER,
    max_doublings: int = QUAD_MAX_DOUBLINGS,
) -> NDArray[np.float64] | float:
    """``int_a^b func(t) dt`` with panel doubling.

    ``breakpoints`` split the interval where the integrand has kinks.
    """

    edges = _edges(a, b, breakpoints)
    previous = None
    panels = 1
    for _ in range(max_doublings + 1):
        nodes, weights = composite_rule(edges, panels, order)
        values = np.asarray(func(nodes), dtype=float)
        if not np.all(np.isfinite(values)):
            raise QuadratureError("integrand is not finite on the quadrature nodes")
        value = values @ weights
        if previous is not None and _converged(value, previous, rtol or _RTOL.get()):
            logger.debug("integral converged with %d panels per segment", panels)
            return _finish(value)
        previous = value
        panels *= 2
    raise QuadratureError(f"no convergence after {max_doublings} panel doublings on [{a}, {b}]")


def integrate_triangle(
    inner: Integrand,
    outer: Integrand,
    a: float,
    b: float,
    *,
    rtol: float | None = None,
    order: int = GL_ORDER,
    max_doublings: int = TRIANGLE_MAX_DOUBLINGS,
) -> NDArray[np.float64]:
    """``int_a^b (int_a^t inner(s) ds) outer(t)^T dt`` for vector integrands.

    ``inner`` and ``outer`` return arrays of shape ``(m, n)``; the result is
    ``m x m``. This is the part of a double integral below the diagonal, where
    a triangular kernel is smooth.
    """

    edges = np.array([a, b], dtype=float)
    previous = None
    panels = 1
    for _ in range(max_doublings + 1):
        t, wt = composite_rule(edges, panels, order)
        x, wx = composite_rule(np.array([0.0, 1.0]), panels, order)
        span = t - a
        s = a + span[:, None] * x[None, :]
        vals = np.asarray(inner(s.ravel()), dtype=float)
        vals = vals.reshape(vals.shape[0], t.size, x.size)
        cumulative = (vals @ wx) * span
        value = np.einsum("kn,ln,n->kl", cumulative, np.asarray(outer(t), dtype=float), wt)
        if not np.all(np.isfinite(value)):
            raise QuadratureError("triangle integrand is not finite")
        if previous is not None and _converged(value, previous, rtol or _RTOL.get()):
            return value
        previous = value
        panels *= 2
    raise QuadratureError(f"triangle integral did not converge on [{a}, {b}]")


def sign_changes(func: Integrand, a: float, b: float, grid: int = 1024) -> tuple[float, ...]:
    """Interior sign changes of a scalar function.

    Changes are bracketed between consecutive nonzero grid values and refined
    by Brent's method; a function that is identically zero has none.
    """

    t = np.linspace(a, b, grid + 1)
    values = np.asarray(func(t), dtype=float)
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    nonzero = np.flatnonzero(np.abs(values) > 1e-13 * scale) if scale > 0 else np.empty(0, int)
    roots: list[float] = []
    for i, j in zip(nonzero[:-1], nonzero[1:]):
        if values[i] * values[j] < 0.0:
            root = brentq(lambda x: float(np.asarray(func(np.array([x])))[0]), t[i], t[j])
            roots.append(float(root))
    return tuple(roots)


class CumulativeDistribution:
    """Distribution function of a non-negative density on ``[a, b]``.

    The interval is cut into cells whose integrals are computed with a fixed
    Gauss-Legendre rule; partial cells use the same rule on the sub-interval.
    ``density`` need not be normalized.
    """

    def __init__(
        self,
        density: Integrand,
        a: float,
        b: float,
        *,
        breakpoints: Sequence[float] = (),
        cells: int = CDF_CELLS,
        order: int = CDF_CELL_ORDER,
    ) -> None:
        self.a, self.b = float(a), float(b)
        self._density = density
        self._order = order
        segments = _edges(self.a, self.b, breakpoints)
        per_segment = max(1, cells // (segments.size - 1))
        self._cuts = np.concatenate(
            [
                np.linspace(lo, hi, per_segment + 1)[:-1]
                for lo, hi in zip(segments[:-1], segments[1:])
            ]
            + [segments[-1:]]
        )
        masses = self._partial(self._cuts[:-1], self._cuts[1:])
        self._cdf = np.concatenate(([0.0], np.cumsum(masses)))
        self.total = float(self._cdf[-1])
        if not self.total > 0.0:
            raise DegenerateDesignError("density integrates to zero")

    def _partial(self, lo: NDArray[np.float64], hi: NDArray[np.float64]) -> NDArray[np.float64]:
        x, w = _rule(self._order)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * x[None, :]
        values = np.asarray(self._density(nodes.ravel()), dtype=float).reshape(nodes.shape)
        return (values @ w) * half

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), self.a, self.b)
        idx = np.clip(np.searchsorted(self._cuts, t, side="right") - 1, 0, self._cuts.size - 2)
        left = self._cuts[idx]
        return (self._cdf[idx] + self._partial(left, t)) / self.total

    def inverse(self, z: ArrayLike) -> NDArray[np.float64]:
        """Smallest ``t`` with ``F(t) >= z``, by bisection inside the bracketing cell."""

        z = np.atleast_1d(np.asarray(z, dtype=float))
        target = z * self.total
        idx = np.searchsorted(self._cdf, target, side="left") - 1
        idx = np.clip(idx, 0, self._cuts.size - 2)
        lo, hi = self._cuts[idx].copy(), self._cuts[idx + 1].copy()
        base = self._cdf[idx]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = base + self._partial(self._cuts[idx], mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return hi
