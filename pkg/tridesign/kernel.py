"""Triangular covariance kernels and Doob time-space maps.

A triangular kernel has the form ``K(t, t') = u(t) v(t')`` for ``t <= t'`` and
is described here by the two functions ``u`` and ``v`` together with their
first and second derivatives. Everything else (``q = u / v``, its derivatives,
the normalized distribution function ``Q`` and its inverse) is derived from
that bundle.

Kernels are immutable after construction; validation happens once in
``__post_init__`` on a dense grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .constants import (
    BISECTION_MAX_ITER,
    BISECTION_RTOL,
    DOOB_RANGE_RTOL,
    VALIDATION_GRID,
)
from .exceptions import DomainError, IncompatibleKernelsError, InvalidKernelError

Func = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def _times(t: ArrayLike) -> NDArray[np.float64]:
    return np.asarray(t, dtype=float)


def _constant(value: float) -> Func:
    return lambda t: np.full(np.shape(t), value, dtype=float)


@dataclass(frozen=True, eq=False)
class TriangularKernel:
    """Covariance kernel ``K(t, t') = u(min(t, t')) v(max(t, t'))`` on ``[a, b]``.

    Parameters
    ----------
    u, v:
        Positive functions on ``(a, b)`` accepting arrays of times.
    du, dv, d2u, d2v:
        Analytic first and second derivatives of ``u`` and ``v``.
    a, b:
        Interval endpoints, ``a < b``.
    family, params:
        Registry name and parameters, used to serialize the kernel back into a
        config mapping. Custom kernels keep the default ``"custom"``.
    """

    u: Func
    v: Func
    du: Func
    dv: Func
    d2u: Func
    d2v: Func
    a: float
    b: float
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        a, b = float(self.a), float(self.b)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise InvalidKernelError(f"invalid interval [{self.a}, {self.b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

        grid = np.linspace(a, b, VALIDATION_GRID + 2)
        inner = grid[1:-1]
        with np.errstate(all="ignore"):
            u_in, v_in = self.u(inner), self.v(inner)
            q_grid = self.q(grid)
            derivs = [f(grid) for f in (self.du, self.dv, self.d2u, self.d2v)]
        if not (np.all(np.isfinite(u_in)) and np.all(np.isfinite(v_in))):
            raise InvalidKernelError(f"{self.family}: u or v is not finite on ({a}, {b})")
        if np.any(u_in <= 0) or np.any(v_in <= 0):
            raise InvalidKernelError(f"{self.family}: u and v must be positive on ({a}, {b})")
        if not all(np.all(np.isfinite(d)) for d in derivs):
            raise InvalidKernelError(f"{self.family}: derivatives are not finite on [{a}, {b}]")
        if not np.all(np.isfinite(q_grid)) or np.any(np.diff(q_grid) <= 0):
            raise InvalidKernelError(f"{self.family}: q = u/v is not strictly increasing")

    # Evaluation ---------------------------------------------------------

    def check_domain(self, t: ArrayLike) -> NDArray[np.float64]:
        """Return ``t`` as an array, raising :class:`DomainError` outside ``[a, b]``."""

        arr = _times(t)
        slack = 1e-12 * (self.b - self.a)
        outside = np.any(arr < self.a - slack) or np.any(arr > self.b + slack)
        if np.any(~np.isfinite(arr)) or outside:
            raise DomainError(f"times must lie in [{self.a}, {self.b}]")
        return np.clip(arr, self.a, self.b)

    def __call__(self, s: ArrayLike, t: ArrayLike) -> NDArray[np.float64]:
        s_arr, t_arr = self.check_domain(s), self.check_domain(t)
        return self.u(np.minimum(s_arr, t_arr)) * self.v(np.maximum(s_arr, t_arr))

    def gram(self, points: ArrayLike) -> NDArray[np.float64]:
        """``K(t_i, t_j)`` for points in any order."""

        t = np.atleast_1d(self.check_domain(points))
        return self(t[:, None], t[None, :])

    def q(self, t: ArrayLike) -> NDArray[np.float64]:
        t = _times(t)
        return self.u(t) / self.v(t)

    def dq(self, t: ArrayLike) -> NDArray[np.float64]:
        t = _times(t)
        v = self.v(t)
        return (self.du(t) * v - self.u(t) * self.dv(t)) / v**2

    def d2q(self, t: ArrayLike) -> NDArray[np.float64]:
        t = _times(t)
        u, v, du, dv = self.u(t), self.v(t), self.du(t), self.dv(t)
        numerator = du * v - u * dv
        return ((self.d2u(t) * v - u * self.d2v(t)) * v - 2.0 * dv * numerator) / v**3

    @property
    def q_range(self) -> tuple[float, float]:
        return float(self.q(self.a)), float(self.q(self.b))

    def Q(self, t: ArrayLike) -> NDArray[np.float64]:
        """Normalized ``q``: a distribution function on ``[a, b]``."""

        t = self.check_domain(t)
        qa, qb = self.q_range
        out = (self.q(t) - qa) / (qb - qa)
        return np.where(t <= self.a, 0.0, np.where(t >= self.b, 1.0, out))

    def q_inverse(self, y: ArrayLike) -> NDArray[np.float64]:
        """Solve ``q(t) = y`` by vectorized bisection.

        Values within a relative ``1e-9`` of the range are clipped onto it;
        anything further out raises :class:`DomainError`.
        """

        y = _times(y)
        qa, qb = self.q_range
        slack = DOOB_RANGE_RTOL * max(abs(qa), abs(qb), qb - qa)
        if np.any(~np.isfinite(y)) or np.any(y < qa - slack) or np.any(y > qb + slack):
            raise DomainError(f"ordinate outside q-range [{qa}, {qb}]")
        y = np.clip(y, qa, qb)

        lo = np.full(y.shape, self.a)
        hi = np.full(y.shape, self.b)
        xtol = BISECTION_RTOL * (self.b - self.a)
        for _ in range(BISECTION_MAX_ITER):
            if np.all(hi - lo <= xtol):
                break
            mid = 0.5 * (lo + hi)
            below = self.q(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        t = 0.5 * (lo + hi)
        return np.where(y <= qa, self.a, np.where(y >= qb, self.b, t))

    def Q_inverse(self, z: ArrayLike) -> NDArray[np.float64]:
        z = _times(z)
        if np.any(~np.isfinite(z)) or np.any(z < 0.0) or np.any(z > 1.0):
            raise DomainError("probabilities must lie in [0, 1]")
        qa, qb = self.q_range
        return self.q_inverse(qa + z * (qb - qa))

    def spec(self) -> dict[str, Any]:
        """Config mapping that rebuilds this kernel through :func:`kernel_from_spec`."""

        return {"family": self.family, **dict(self.params), "a": self.a, "b": self.b}


# Builtin families ----------------------------------------------------------


def brownian(a: float, b: float) -> TriangularKernel:
    """Brownian motion, ``K(t, t') = min(t, t')``."""

    return TriangularKernel(
        u=_times,
        v=_constant(1.0),
        du=_constant(1.0),
        dv=_constant(0.0),
        d2u=_constant(0.0),
        d2v=_constant(0.0),
        a=a,
        b=b,
        family="brownian",
    )


def affine_pair(c1: float, c2: float, sign: int, a: float, b: float) -> TriangularKernel:
    """``u(t) = c1 + t`` and ``v(t) = c2 + sign * t`` with ``sign`` in {+1, -1}."""

    if sign not in (1, -1):
        raise InvalidKernelError(f"affine-pair sign must be +1 or -1, got {sign}")
    return TriangularKernel(
        u=lambda t: c1 + _times(t),
        v=lambda t: c2 + sign * _times(t),
        du=_constant(1.0),
        dv=_constant(float(sign)),
        d2u=_constant(0.0),
        d2v=_constant(0.0),
        a=a,
        b=b,
        family="affine-pair",
        params={"c1": c1, "c2": c2, "sign": sign},
    )


def power_pair(gamma: float, omega: float, a: float, b: float) -> TriangularKernel:
    """``u(t) = t**gamma`` and ``v(t) = t**omega`` on a positive interval."""

    if a <= 0:
        raise InvalidKernelError("power-pair kernels need a > 0")

    def power(k: float) -> Func:
        return lambda t: _times(t) ** k

    def dpower(k: float, order: int) -> Func:
        coef = k if order == 1 else k * (k - 1.0)
        return lambda t: coef * _times(t) ** (k - order)

    return TriangularKernel(
        u=power(gamma),
        v=power(omega),
        du=dpower(gamma, 1),
        dv=dpower(omega, 1),
        d2u=dpower(gamma, 2),
        d2v=dpower(omega, 2),
        a=a,
        b=b,
        family="power-pair",
        params={"gamma": gamma, "omega": omega},
    )


def exp_pair(lam: float, gamma: float, a: float, b: float) -> TriangularKernel:
    """``u(t) = exp(lam t)`` and ``v(t) = exp(-gamma t)``.

    ``lam = gamma`` gives the Ornstein-Uhlenbeck kernel ``exp(-lam |t - t'|)``;
    ``gamma = 0`` gives ``v = 1``.
    """

    return TriangularKernel(
        u=lambda t: np.exp(lam * _times(t)),
        v=lambda t: np.exp(-gamma * _times(t)),
        du=lambda t: lam * np.exp(lam * _times(t)),
        dv=lambda t: -gamma * np.exp(-gamma * _times(t)),
        d2u=lambda t: lam**2 * np.exp(lam * _times(t)),
        d2v=lambda t: gamma**2 * np.exp(-gamma * _times(t)),
        a=a,
        b=b,
        family="exp-pair",
        params={"lambda": lam, "gamma": gamma},
    )


def _build_affine(p: Mapping[str, Any], a: float, b: float) -> TriangularKernel:
    return affine_pair(float(p["c1"]), float(p["c2"]), int(p.get("sign", 1)), a, b)


def _build_power(p: Mapping[str, Any], a: float, b: float) -> TriangularKernel:
    return power_pair(float(p["gamma"]), float(p["omega"]), a, b)


def _build_exp(p: Mapping[str, Any], a: float, b: float) -> TriangularKernel:
    lam = float(p["lambda"])
    return exp_pair(lam, float(p.get("gamma", lam)), a, b)


KernelBuilder = Callable[..., TriangularKernel]

# family -> (builder, required params, optional params)
KERNEL_FAMILIES: dict[str, tuple[KernelBuilder, tuple[str, ...], tuple[str, ...]]] = {
    "brownian": (lambda p, a, b: brownian(a, b), (), ()),
    "affine-pair": (_build_affine, ("c1", "c2"), ("sign",)),
    "power-pair": (_build_power, ("gamma", "omega"), ()),
    "exp-pair": (_build_exp, ("lambda",), ("gamma",)),
}


def kernel_from_spec(spec: Mapping[str, Any]) -> TriangularKernel:
    """Build a registry kernel from ``{family: ..., <params>, a: ..., b: ...}``."""

    params = dict(spec)
    family = params.pop("family", None)
    if family not in KERNEL_FAMILIES:
        raise InvalidKernelError(
            f"unknown kernel family {family!r}; expected one of {sorted(KERNEL_FAMILIES)}"
        )
    try:
        a, b = float(params.pop("a")), float(params.pop("b"))
    except KeyError as exc:
        raise InvalidKernelError(f"kernel spec needs interval endpoint {exc}") from None
    builder, required, optional = KERNEL_FAMILIES[family]
    missing = [name for name in required if name not in params]
    unknown = [name for name in params if name not in required + optional]
    if missing or unknown:
        raise InvalidKernelError(
            f"{family}: missing parameters {missing}, unknown parameters {unknown}"
        )
    try:
        return builder(params, a, b)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidKernelError):
            raise
        raise InvalidKernelError(f"{family}: bad parameter value ({exc})") from exc


def brownian_image(kernel: TriangularKernel) -> TriangularKernel:
    """Brownian motion on ``[q(a), q(b)]``, the canonical Doob target of ``kernel``."""

    qa, qb = kernel.q_range
    return brownian(qa, qb)


# Doob maps -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeChange:
    """One direction of a Doob map.

    Maps times of ``origin`` onto times of ``destination`` by
    ``beta(t) = q_dest^{-1}(q_orig(t))`` with scale
    ``alpha(t) = v_orig(t) / v_dest(beta(t))``, so that
    ``alpha(t) eps_dest(beta(t))`` has the covariance of ``origin``.
    """

    origin: TriangularKernel
    destination: TriangularKernel

    @property
    def is_identity(self) -> bool:
        return self.origin is self.destination

    def beta(self, t: ArrayLike) -> NDArray[np.float64]:
        t = self.origin.check_domain(t)
        if self.is_identity:
            return t
        return self.destination.q_inverse(self.origin.q(t))

    def alpha(self, t: ArrayLike) -> NDArray[np.float64]:
        t = self.origin.check_domain(t)
        return self.origin.v(t) / self.destination.v(self.beta(t))

    def derivatives(self, t: ArrayLike) -> tuple[NDArray[np.float64], ...]:
        """Return ``(beta, beta', beta'', alpha, alpha', alpha'')`` at ``t``."""

        t = self.origin.check_domain(t)
        src, dst = self.origin, self.destination
        beta = self.beta(t)
        dbeta = src.dq(t) / dst.dq(beta)
        d2beta = (src.d2q(t) - dst.d2q(beta) * dbeta**2) / dst.dq(beta)

        v, dv, d2v = src.v(t), src.dv(t), src.d2v(t)
        g = dst.v(beta)
        dg = dst.dv(beta) * dbeta
        d2g = dst.d2v(beta) * dbeta**2 + dst.dv(beta) * d2beta
        alpha = v / g
        slope = dv * g - v * dg
        dalpha = slope / g**2
        d2alpha = (d2v * g - v * d2g) / g**2 - 2.0 * dg * slope / g**3
        return beta, dbeta, d2beta, alpha, dalpha, d2alpha


@dataclass(frozen=True, eq=False)
class DoobMap:
    """Time-space transformation between two kernels sharing a q-range.

    ``forward`` maps source times to target times; ``backward`` is its inverse
    (``beta~`` and ``alpha~``). Construction raises
    :class:`IncompatibleKernelsError` when the q-ranges differ.
    """

    source: TriangularKernel
    target: TriangularKernel

    def __post_init__(self) -> None:
        src, dst = self.source.q_range, self.target.q_range
        scale = max(abs(src[0]), abs(src[1]), src[1] - src[0])
        if abs(src[0] - dst[0]) > DOOB_RANGE_RTOL * scale or abs(src[1] - dst[1]) > (
            DOOB_RANGE_RTOL * scale
        ):
            raise IncompatibleKernelsError(
                f"q-ranges differ: source {src}, target {dst}"
            )

    @property
    def forward(self) -> TimeChange:
        return TimeChange(self.source, self.target)

    @property
    def backward(self) -> TimeChange:
        return TimeChange(self.target, self.source)

    def beta(self, t: ArrayLike) -> NDArray[np.float64]:
        return self.forward.beta(t)

    def alpha(self, t: ArrayLike) -> NDArray[np.float64]:
        return self.forward.alpha(t)

    def beta_inverse(self, s: ArrayLike) -> NDArray[np.float64]:
        return self.backward.beta(s)

    def alpha_inverse(self, s: ArrayLike) -> NDArray[np.float64]:
        return self.backward.alpha(s)

    def inverse(self) -> DoobMap:
        return DoobMap(self.target, self.source)


def doob_map(source: TriangularKernel, target: TriangularKernel) -> DoobMap:
    return DoobMap(source, target)
