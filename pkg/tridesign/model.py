"""Regression function bundles ``f``, ``f'`` and ``f''`` on an interval.

A :class:`RegressionModel` evaluates its ``m`` regression functions at an
array of times and returns an array of shape ``(m, *t.shape)``. Derivatives are
supplied analytically; the test suite checks them against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .constants import GRAM_DET_MIN, VALIDATION_GRID, VANISHING_TOL
from .exceptions import DomainError, InvalidModelError
from .kernel import DoobMap, TriangularKernel

VectorFunc = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def _times(t: ArrayLike) -> NDArray[np.float64]:
    return np.asarray(t, dtype=float)


def _stack(t: NDArray[np.float64], components: Sequence[Any]) -> NDArray[np.float64]:
    shape = np.shape(t)
    return np.stack([np.broadcast_to(np.asarray(c, dtype=float), shape) for c in components])


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Linearly independent regression functions on ``[a, b]``.

    Parameters
    ----------
    f, df, d2f:
        Callables mapping an array ``t`` to an array of shape ``(m, *t.shape)``.
    m:
        Number of parameters.
    a, b:
        Domain endpoints.
    family, params:
        Registry name and parameters for serialization.
    """

    f: VectorFunc
    df: VectorFunc
    d2f: VectorFunc
    m: int
    a: float
    b: float
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise InvalidModelError("a model needs at least one regression function")
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
            raise InvalidModelError(f"invalid domain [{self.a}, {self.b}]")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

        grid = np.linspace(self.a, self.b, 4 * self.m)
        values = self.f(grid)
        if values.shape != (self.m, grid.size):
            raise InvalidModelError(
                f"f returned shape {values.shape}, expected {(self.m, grid.size)}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidModelError(f"{self.family}: f is not finite on [{self.a}, {self.b}]")
        gram = values @ values.T / grid.size
        if np.linalg.det(gram) <= GRAM_DET_MIN:
            raise InvalidModelError(f"{self.family}: regression functions are linearly dependent")

    def check_domain(self, t: ArrayLike) -> NDArray[np.float64]:
        arr = _times(t)
        slack = 1e-12 * (self.b - self.a)
        outside = np.any(arr < self.a - slack) or np.any(arr > self.b + slack)
        if np.any(~np.isfinite(arr)) or outside:
            raise DomainError(f"times must lie in [{self.a}, {self.b}]")
        return np.clip(arr, self.a, self.b)

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        return self.f(self.check_domain(t))

    def component(self, k: int) -> RegressionModel:
        """The one-parameter model built from the ``k``-th regression function."""

        return RegressionModel(
            f=lambda t: self.f(t)[k : k + 1],
            df=lambda t: self.df(t)[k : k + 1],
            d2f=lambda t: self.d2f(t)[k : k + 1],
            m=1,
            a=self.a,
            b=self.b,
            family=f"{self.family}[{k}]",
        )

    def require_nonvanishing(self, components: Sequence[int] | None = None) -> None:
        """Raise :class:`InvalidModelError` unless each listed component keeps one sign."""

        grid = np.linspace(self.a, self.b, VALIDATION_GRID + 2)
        values = self.f(grid)
        for k in range(self.m) if components is None else components:
            row = values[k]
            if np.min(np.abs(row)) < VANISHING_TOL or np.min(row) * np.max(row) < 0:
                raise InvalidModelError(
                    f"{self.family}: component {k} vanishes on [{self.a}, {self.b}]"
                )

    def spec(self) -> dict[str, Any]:
        return {"family": self.family, **dict(self.params)}


def h_derivatives(
    model: RegressionModel, kernel: TriangularKernel, t: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Return ``h = f / v`` with its first and second derivatives at ``t``."""

    t = kernel.check_domain(t)
    f, df, d2f = model.f(t), model.df(t), model.d2f(t)
    v, dv, d2v = kernel.v(t), kernel.dv(t), kernel.d2v(t)
    slope = df * v - f * dv
    h = f / v
    dh = slope / v**2
    d2h = (d2f * v - f * d2v) / v**2 - 2.0 * dv * slope / v**3
    return h, dh, d2h


def h_of(model: RegressionModel, kernel: TriangularKernel, t: ArrayLike) -> NDArray[np.float64]:
    t = kernel.check_domain(t)
    return model.f(t) / kernel.v(t)


def _require_same_domain(model: RegressionModel, kernel: TriangularKernel) -> None:
    tol = 1e-9 * (kernel.b - kernel.a)
    if abs(model.a - kernel.a) > tol or abs(model.b - kernel.b) > tol:
        raise DomainError(
            f"model domain [{model.a}, {model.b}] differs from kernel domain "
            f"[{kernel.a}, {kernel.b}]"
        )


def transform_model(model: RegressionModel, doob: DoobMap) -> RegressionModel:
    """Carry ``model`` into the time scale of ``doob.target``.

    The transformed regression functions are ``f~(s) = alpha~(s) f(beta~(s))``;
    applying the transform with ``doob.inverse()`` recovers ``f``.
    """

    _require_same_domain(model, doob.source)
    back = doob.backward

    def f(s: NDArray[np.float64]) -> NDArray[np.float64]:
        beta, _, _, alpha, _, _ = back.derivatives(s)
        return alpha * model.f(beta)

    def df(s: NDArray[np.float64]) -> NDArray[np.float64]:
        beta, dbeta, _, alpha, dalpha, _ = back.derivatives(s)
        return dalpha * model.f(beta) + alpha * model.df(beta) * dbeta

    def d2f(s: NDArray[np.float64]) -> NDArray[np.float64]:
        beta, dbeta, d2beta, alpha, dalpha, d2alpha = back.derivatives(s)
        f0, f1, f2 = model.f(beta), model.df(beta), model.d2f(beta)
        return (
            d2alpha * f0
            + 2.0 * dalpha * f1 * dbeta
            + alpha * (f2 * dbeta**2 + f1 * d2beta)
        )

    return RegressionModel(
        f=f,
        df=df,
        d2f=d2f,
        m=model.m,
        a=doob.target.a,
        b=doob.target.b,
        family=f"{model.family}~",
        params=model.params,
    )


# Builtin models ------------------------------------------------------------


def location(a: float, b: float) -> RegressionModel:
    """``f(t) = 1``."""

    return RegressionModel(
        f=lambda t: _stack(_times(t), [1.0]),
        df=lambda t: _stack(_times(t), [0.0]),
        d2f=lambda t: _stack(_times(t), [0.0]),
        m=1,
        a=a,
        b=b,
        family="location",
    )


def linear(a: float, b: float) -> RegressionModel:
    """``f(t) = t``, regression through the origin."""

    return RegressionModel(
        f=lambda t: _stack(_times(t), [_times(t)]),
        df=lambda t: _stack(_times(t), [1.0]),
        d2f=lambda t: _stack(_times(t), [0.0]),
        m=1,
        a=a,
        b=b,
        family="linear",
    )


def quadratic(nu: float, a: float, b: float) -> RegressionModel:
    """``f(t) = t**2 + nu``."""

    return RegressionModel(
        f=lambda t: _stack(_times(t), [_times(t) ** 2 + nu]),
        df=lambda t: _stack(_times(t), [2.0 * _times(t)]),
        d2f=lambda t: _stack(_times(t), [2.0]),
        m=1,
        a=a,
        b=b,
        family="quadratic",
        params={"nu": nu},
    )


def trig(a: float, b: float) -> RegressionModel:
    """``f(t) = 1 + sin(2 pi t) / 2``."""

    w = 2.0 * np.pi
    return RegressionModel(
        f=lambda t: _stack(_times(t), [1.0 + 0.5 * np.sin(w * _times(t))]),
        df=lambda t: _stack(_times(t), [0.5 * w * np.cos(w * _times(t))]),
        d2f=lambda t: _stack(_times(t), [-0.5 * w**2 * np.sin(w * _times(t))]),
        m=1,
        a=a,
        b=b,
        family="trig",
    )


def monomial(m: int, a: float, b: float) -> RegressionModel:
    """``f(t) = (1, t, ..., t**(m-1))``."""

    if m < 1:
        raise InvalidModelError("monomial basis needs m >= 1")

    def f(t: NDArray[np.float64]) -> NDArray[np.float64]:
        t = _times(t)
        return _stack(t, [t**k for k in range(m)])

    def df(t: NDArray[np.float64]) -> NDArray[np.float64]:
        t = _times(t)
        return _stack(t, [k * t ** (k - 1) if k >= 1 else 0.0 for k in range(m)])

    def d2f(t: NDArray[np.float64]) -> NDArray[np.float64]:
        t = _times(t)
        return _stack(t, [k * (k - 1) * t ** (k - 2) if k >= 2 else 0.0 for k in range(m)])

    return RegressionModel(
        f=f, df=df, d2f=d2f, m=m, a=a, b=b, family="monomial", params={"m": m}
    )


MODEL_FAMILIES: dict[str, tuple[Callable[..., RegressionModel], tuple[str, ...]]] = {
    "location": (lambda p, a, b: location(a, b), ()),
    "linear": (lambda p, a, b: linear(a, b), ()),
    "quadratic": (lambda p, a, b: quadratic(float(p.get("nu", 1.0)), a, b), ("nu",)),
    "trig": (lambda p, a, b: trig(a, b), ()),
    "monomial": (lambda p, a, b: monomial(int(p.get("m", 2)), a, b), ("m",)),
}


def model_from_spec(spec: Mapping[str, Any], a: float, b: float) -> RegressionModel:
    """Build a registry model from ``{family: ..., <params>}`` on ``[a, b]``."""

    params = dict(spec)
    family = params.pop("family", None)
    if family not in MODEL_FAMILIES:
        raise InvalidModelError(
            f"unknown model family {family!r}; expected one of {sorted(MODEL_FAMILIES)}"
        )
    builder, accepted = MODEL_FAMILIES[family]
    unknown = [name for name in params if name not in accepted]
    if unknown:
        raise InvalidModelError(f"{family}: unknown parameters {unknown}")
    try:
        return builder(params, a, b)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModelError):
            raise
        raise InvalidModelError(f"{family}: bad parameter value ({exc})") from exc
