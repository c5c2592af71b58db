"""Limiting optimal designs and the optimal covariance ``D*``.

As the number of observations grows, optimal signed designs converge to a
signed measure made of two endpoint atoms and a density on ``(a, b)``. With
``h = f / v`` the unnormalized pieces of that measure (the BLUE measure up to
the factor ``D*``) are

* at ``a``: ``(f(a) u'(a) / u(a) - f'(a)) / (v(a)**2 q'(a))``
* at ``b``: ``h'(b) / (v(b) q'(b))``
* inside: ``-(h' / q')' / v``

and a design for the scalar model divides them by ``f``. Everything is
evaluated from analytic derivatives; integrals use :mod:`tridesign.quadrature`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Literal, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .constants import CONDITION_MAX, DENSITY_ZERO_RTOL, VALIDATION_GRID
from .design import SignedDesign
from .exceptions import (
    DegenerateDesignError,
    DomainError,
    InvalidKernelError,
    InvalidModelError,
    SingularMatrixError,
)
from .kernel import DoobMap, TriangularKernel, brownian
from .logging_utils import get_logger
from .model import RegressionModel, _require_same_domain, h_derivatives
from .quadrature import integrate, integrate_triangle, sign_changes

logger = get_logger("asymptotic")

Density = Callable[[NDArray[np.float64]], NDArray[np.float64]]
Representation = Literal["one-column", "diagonal"]
REPRESENTATIONS: tuple[str, ...] = ("one-column", "diagonal")


@dataclass(frozen=True, eq=False)
class LimitingDesign:
    """Signed measure ``P_a delta_a + P_b delta_b + p(t) dt`` on ``[a, b]``.

    ``breakpoints`` lists interior zeros of ``p``; integrals of ``|p|`` split
    there. ``c`` records the scale the design was built with.
    """

    a: float
    b: float
    mass_a: float
    mass_b: float
    density: Density
    c: float = 1.0
    breakpoints: tuple[float, ...] = ()

    def integral(self, func: Density) -> float:
        """``int g dxi`` for a scalar function ``g``."""

        ga, gb = (float(np.asarray(func(np.array([x])))[..., 0]) for x in (self.a, self.b))
        inner = integrate(lambda t: func(t) * self.density(t), self.a, self.b,
                          breakpoints=self.breakpoints)
        return self.mass_a * ga + self.mass_b * gb + float(inner)

    @property
    def signed_interior_mass(self) -> float:
        return float(integrate(self.density, self.a, self.b, breakpoints=self.breakpoints))

    @property
    def interior_mass(self) -> float:
        """``int |p|``, the budget ``P`` spread over interior points."""

        return float(
            integrate(lambda t: np.abs(self.density(t)), self.a, self.b,
                      breakpoints=self.breakpoints)
        )

    @property
    def total_variation(self) -> float:
        return abs(self.mass_a) + abs(self.mass_b) + self.interior_mass

    @property
    def has_density(self) -> bool:
        return self.interior_mass > DENSITY_ZERO_RTOL * max(1.0, self.total_variation)

    def scaled(self, k: float) -> LimitingDesign:
        density = self.density
        return replace(
            self,
            mass_a=k * self.mass_a,
            mass_b=k * self.mass_b,
            density=lambda t: k * density(t),
            c=k * self.c,
        )

    def normalized(self) -> LimitingDesign:
        """Scale to total variation one with ``int p >= 0``.

        Without a density the sign makes ``P_a + P_b`` positive.
        """

        total = self.total_variation
        if total == 0.0:
            raise DegenerateDesignError("design has no mass")
        if self.has_density:
            sign = 1.0 if self.signed_interior_mass >= 0 else -1.0
        else:
            sign = 1.0 if self.mass_a + self.mass_b >= 0 else -1.0
        return self.scaled(sign / total)

    def density_samples(self, n: int = 101) -> NDArray[np.float64]:
        t = np.linspace(self.a, self.b, n)
        return np.column_stack([t, self.density(t)])

    def as_matrix(self) -> MatrixLimitingDesign:
        """The same design with ``1 x 1`` matrix weights."""

        density = self.density
        return MatrixLimitingDesign(
            a=self.a,
            b=self.b,
            mass_a=np.array([[self.mass_a]]),
            mass_b=np.array([[self.mass_b]]),
            density=lambda t: np.asarray(density(t))[None, None, :],
            representation="diagonal",
            c=self.c,
        )


@dataclass(frozen=True, eq=False)
class MatrixLimitingDesign:
    """Matrix atoms ``O_a``, ``O_b`` and a matrix density ``O(t)`` of shape ``(m, m, n)``."""

    a: float
    b: float
    mass_a: NDArray[np.float64]
    mass_b: NDArray[np.float64]
    density: Density
    representation: str = "diagonal"
    c: float = 1.0

    @property
    def m(self) -> int:
        return int(self.mass_a.shape[0])

    def diagonal_density(self, t: ArrayLike) -> NDArray[np.float64]:
        """``O_kk(t)`` as an ``(m, n)`` array."""

        dens = self.density(np.atleast_1d(np.asarray(t, dtype=float)))
        return np.einsum("kkn->kn", dens)

    def scaled(self, k: float) -> MatrixLimitingDesign:
        density = self.density
        return replace(
            self,
            mass_a=k * self.mass_a,
            mass_b=k * self.mass_b,
            density=lambda t: k * density(t),
            c=k * self.c,
        )


AnyDesign = Union[SignedDesign, LimitingDesign, MatrixLimitingDesign]


# Building blocks -----------------------------------------------------------


def _at(func: Density, x: float) -> NDArray[np.float64]:
    return np.asarray(func(np.array([x])))[..., 0]


def _check_regular(model: RegressionModel, kernel: TriangularKernel) -> None:
    _require_same_domain(model, kernel)
    grid = np.linspace(kernel.a, kernel.b, VALIDATION_GRID + 2)
    if np.any(kernel.dq(grid) <= 0):
        raise InvalidKernelError(f"{kernel.family}: q' vanishes on [{kernel.a}, {kernel.b}]")
    if kernel.u(np.array([kernel.a]))[0] <= 0:
        raise DomainError(f"{kernel.family}: u(a) must be positive")


def _numerators(
    model: RegressionModel, kernel: TriangularKernel
) -> tuple[NDArray[np.float64], NDArray[np.float64], Density]:
    """Atoms and density of the unnormalized BLUE measure, one row per component."""

    _check_regular(model, kernel)
    a, b = kernel.a, kernel.b
    fa, dfa = _at(model.f, a), _at(model.df, a)
    ua, dua, va = (_at(fn, a) for fn in (kernel.u, kernel.du, kernel.v))
    at_a = (fa * dua / ua - dfa) / (va**2 * _at(kernel.dq, a))
    _, dhb, _ = h_derivatives(model, kernel, np.array([b]))
    at_b = dhb[:, 0] / (_at(kernel.v, b) * _at(kernel.dq, b))

    def density(t: NDArray[np.float64]) -> NDArray[np.float64]:
        t = kernel.check_domain(t)
        _, dh, d2h = h_derivatives(model, kernel, t)
        dq, d2q = kernel.dq(t), kernel.d2q(t)
        return -(d2h * dq - dh * d2q) / (dq**2 * kernel.v(t))

    return at_a, at_b, density


def _with_breakpoints(raw: LimitingDesign) -> LimitingDesign:
    """Attach the interior sign changes of a density that is not negligible."""

    grid = np.linspace(raw.a, raw.b, VALIDATION_GRID + 1)
    peak = float(np.max(np.abs(raw.density(grid))))
    if peak <= DENSITY_ZERO_RTOL * max(1.0, abs(raw.mass_a), abs(raw.mass_b)):
        return replace(raw, breakpoints=())
    breakpoints = sign_changes(raw.density, raw.a, raw.b)
    if breakpoints:
        logger.debug("density changes sign at %s", ", ".join(f"{x:.6g}" for x in breakpoints))
    return replace(raw, breakpoints=breakpoints)


def _finish(raw: LimitingDesign, c: float | None) -> LimitingDesign:
    raw = _with_breakpoints(raw)
    if c is None:
        return raw.normalized()
    return raw.scaled(c)


# Scalar designs ------------------------------------------------------------


def limiting_design(
    model: RegressionModel, kernel: TriangularKernel, c: float | None = None
) -> LimitingDesign:
    """Limit of the optimal signed designs for a one-parameter model.

    With ``c=None`` the result is normalized to total variation one; otherwise
    its pieces are the unnormalized ones times ``c``.
    """

    if model.m != 1:
        raise InvalidModelError("limiting_design needs a one-parameter model")
    model.require_nonvanishing()
    at_a, at_b, numerator = _numerators(model, kernel)
    f = model.f

    raw = LimitingDesign(
        a=kernel.a,
        b=kernel.b,
        mass_a=float(at_a[0] / _at(f, kernel.a)[0]),
        mass_b=float(at_b[0] / _at(f, kernel.b)[0]),
        density=lambda t: numerator(t)[0] / f(t)[0],
    )
    return _finish(raw, c)


def brownian_limiting_design(
    model: RegressionModel,
    a: float | None = None,
    b: float | None = None,
    c: float | None = None,
) -> LimitingDesign:
    """Closed form for Brownian motion on ``[a, b]`` with ``0 < a``.

    ``P_a = c (f(a) - a f'(a)) / (a f(a))``, ``P_b = c f'(b) / f(b)`` and
    ``p = -c f'' / f``.
    """

    a = model.a if a is None else float(a)
    b = model.b if b is None else float(b)
    if a <= 0:
        raise DomainError("the Brownian closed form needs a > 0")
    if model.m != 1:
        raise InvalidModelError("brownian_limiting_design needs a one-parameter model")
    _require_same_domain(model, brownian(a, b))
    model.require_nonvanishing()
    fa, dfa = _at(model.f, a)[0], _at(model.df, a)[0]
    fb, dfb = _at(model.f, b)[0], _at(model.df, b)[0]
    raw = LimitingDesign(
        a=a,
        b=b,
        mass_a=float((fa - a * dfa) / (a * fa)),
        mass_b=float(dfb / fb),
        density=lambda t: -model.d2f(t)[0] / model.f(t)[0],
    )
    return _finish(raw, c)


def optimal_information_matrix(
    model: RegressionModel, kernel: TriangularKernel
) -> NDArray[np.float64]:
    """``f(a) f(a)^T / K(a, a) + int h' h'^T / q' dt``."""

    _check_regular(model, kernel)
    a = kernel.a
    fa = _at(model.f, a)
    kaa = float(kernel(a, a))

    def integrand(t: NDArray[np.float64]) -> NDArray[np.float64]:
        _, dh, _ = h_derivatives(model, kernel, t)
        return np.einsum("kn,ln->kln", dh, dh) / kernel.dq(t)

    info = np.asarray(integrate(integrand, a, kernel.b)).reshape(model.m, model.m)
    return info + np.outer(fa, fa) / kaa


def _inverse(matrix: NDArray[np.float64], what: str) -> NDArray[np.float64]:
    if not np.all(np.isfinite(matrix)) or np.linalg.cond(matrix) > CONDITION_MAX:
        raise SingularMatrixError(f"{what} is singular or nearly singular")
    inv = np.linalg.inv(matrix)
    return 0.5 * (inv + inv.T)


def optimal_covariance_matrix(
    model: RegressionModel, kernel: TriangularKernel
) -> NDArray[np.float64]:
    """``D*``: the covariance of the BLUE that observes the whole path."""

    return _inverse(optimal_information_matrix(model, kernel), "optimal information matrix")


def optimal_variance_dstar(model: RegressionModel, kernel: TriangularKernel) -> float:
    if model.m != 1:
        raise InvalidModelError("D* is a scalar for one-parameter models only")
    return float(optimal_covariance_matrix(model, kernel)[0, 0])


def psi(matrix: ArrayLike) -> float:
    """D-criterion ``det(D)**(1/m)``."""

    D = np.atleast_2d(np.asarray(matrix, dtype=float))
    sign, logdet = np.linalg.slogdet(D)
    if sign <= 0:
        raise SingularMatrixError("D-criterion needs a positive definite matrix")
    return float(np.exp(logdet / D.shape[0]))


def blue_measure(model: RegressionModel, kernel: TriangularKernel) -> LimitingDesign:
    """Signed measure ``mu*`` with ``theta_hat = int y dmu*`` the continuous-time BLUE.

    ``mu* = f xi`` for the limiting design scaled by ``c* = D*``.
    """

    if model.m != 1:
        raise InvalidModelError("blue_measure needs a one-parameter model")
    dstar = optimal_variance_dstar(model, kernel)
    at_a, at_b, numerator = _numerators(model, kernel)
    raw = LimitingDesign(
        a=kernel.a,
        b=kernel.b,
        mass_a=float(at_a[0]),
        mass_b=float(at_b[0]),
        density=lambda t: numerator(t)[0],
    )
    return _with_breakpoints(raw).scaled(dstar)


def measure_variance(measure: LimitingDesign, kernel: TriangularKernel) -> float:
    """``int int K(s, t) dmu(s) dmu(t)``, the variance of ``int y dmu``."""

    density = measure.density
    return float(
        _measure_covariance(
            kernel,
            np.array([measure.mass_a]),
            np.array([measure.mass_b]),
            lambda t: np.asarray(density(t))[None, :],
        )[0, 0]
    )


def _measure_covariance(
    kernel: TriangularKernel,
    atom_a: NDArray[np.float64],
    atom_b: NDArray[np.float64],
    density: Density,
) -> NDArray[np.float64]:
    """``int int K(s, t) dG(s) dG(t)^T`` for a vector measure ``G``.

    ``G`` has atoms ``atom_a`` and ``atom_b`` and density ``density(t)`` of
    shape ``(m, n)``. The kernel is smooth off the diagonal, so the double
    integral over the square is twice the triangle below it, transposed.
    """

    a, b = kernel.a, kernel.b
    kaa, kbb, kab = (float(kernel(s, t)) for s, t in ((a, a), (b, b), (a, b)))
    ua, vb = float(kernel.u(np.array([a]))[0]), float(kernel.v(np.array([b]))[0])

    out = kaa * np.outer(atom_a, atom_a) + kbb * np.outer(atom_b, atom_b)
    out += kab * (np.outer(atom_a, atom_b) + np.outer(atom_b, atom_a))

    from_a = ua * np.atleast_1d(integrate(lambda t: kernel.v(t) * density(t), a, b))
    from_b = vb * np.atleast_1d(integrate(lambda t: kernel.u(t) * density(t), a, b))
    cross = np.outer(atom_a, from_a) + np.outer(atom_b, from_b)
    out += cross + cross.T

    X = integrate_triangle(
        lambda s: kernel.u(s) * density(s), lambda t: kernel.v(t) * density(t), a, b
    )
    out += X + X.T
    return 0.5 * (out + out.T)


def covariance_profile(
    design: LimitingDesign, model: RegressionModel, kernel: TriangularKernel, s: ArrayLike
) -> NDArray[np.float64]:
    """``int K(s, t) f(t) dxi(t)`` at each ``s``.

    For an optimal design built with scale ``c`` this equals ``c f(s)``.
    """

    if model.m != 1:
        raise InvalidModelError("covariance_profile needs a one-parameter model")
    s = kernel.check_domain(np.atleast_1d(np.asarray(s, dtype=float)))
    a, b = design.a, design.b
    fa, fb = _at(model.f, a)[0], _at(model.f, b)[0]
    out = np.empty(s.shape)
    for i, x in enumerate(s):
        inner = integrate(
            lambda t: kernel(x, t) * model.f(t)[0] * design.density(t),
            a,
            b,
            breakpoints=(x, *design.breakpoints),
        )
        out[i] = (
            design.mass_a * kernel(x, a) * fa + design.mass_b * kernel(x, b) * fb + float(inner)
        )
    return out


def continuous_variance_functional(
    design: LimitingDesign, model: RegressionModel, kernel: TriangularKernel
) -> float:
    """Variance of the continuous-time weighted estimator ``int y f dxi / int f**2 dxi``."""

    if model.m != 1:
        raise InvalidModelError("the variance functional is defined for one-parameter models")
    return float(continuous_mwe_covariance(design.as_matrix(), model, kernel)[0, 0])


# Matrix designs ------------------------------------------------------------


def matrix_limiting_design(
    model: RegressionModel,
    kernel: TriangularKernel,
    representation: str = "diagonal",
    c: float = 1.0,
) -> MatrixLimitingDesign:
    """Limiting optimal matrix-weighted design.

    ``one-column`` divides every component by ``f_1`` and puts the result in
    the first column; ``diagonal`` divides component ``k`` by ``f_k``.
    """

    if representation not in REPRESENTATIONS:
        raise DomainError(f"representation must be one of {REPRESENTATIONS}")
    at_a, at_b, numerator = _numerators(model, kernel)
    a, b, m = kernel.a, kernel.b, model.m
    fa, fb = _at(model.f, a), _at(model.f, b)

    if representation == "one-column":
        model.require_nonvanishing([0])

        def place(values: NDArray[np.float64], f: NDArray[np.float64]) -> NDArray[np.float64]:
            out = np.zeros((m, m) + values.shape[1:])
            out[:, 0] = values / f[0]
            return out

    else:
        model.require_nonvanishing()
        idx = np.arange(m)

        def place(values: NDArray[np.float64], f: NDArray[np.float64]) -> NDArray[np.float64]:
            out = np.zeros((m, m) + values.shape[1:])
            out[idx, idx] = values / f
            return out

    def density(t: NDArray[np.float64]) -> NDArray[np.float64]:
        t = np.atleast_1d(t)
        return c * place(numerator(t), model.f(t))

    return MatrixLimitingDesign(
        a=a,
        b=b,
        mass_a=c * place(at_a, fa),
        mass_b=c * place(at_b, fb),
        density=density,
        representation=representation,
        c=c,
    )


def continuous_information_matrix(
    design: MatrixLimitingDesign, model: RegressionModel
) -> NDArray[np.float64]:
    """``M = O_a f(a) f(a)^T + O_b f(b) f(b)^T + int O(t) f(t) f(t)^T dt``."""

    a, b = design.a, design.b
    fa, fb = _at(model.f, a), _at(model.f, b)

    def integrand(t: NDArray[np.float64]) -> NDArray[np.float64]:
        f = model.f(t)
        g = np.einsum("kln,ln->kn", design.density(t), f)
        return np.einsum("kn,ln->kln", g, f)

    inner = np.asarray(integrate(integrand, a, b)).reshape(design.m, design.m)
    return np.outer(design.mass_a @ fa, fa) + np.outer(design.mass_b @ fb, fb) + inner


def continuous_mwe_covariance(
    design: MatrixLimitingDesign, model: RegressionModel, kernel: TriangularKernel
) -> NDArray[np.float64]:
    """``M^{-1} B M^{-T}`` with ``B = int int K(s, t) O(s) f(s) f(t)^T O(t)^T``."""

    _require_same_domain(model, kernel)
    if design.m != model.m:
        raise DomainError(f"design has {design.m} parameters, model has {model.m}")
    info = continuous_information_matrix(design, model)
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > CONDITION_MAX:
        raise DegenerateDesignError("information matrix of the design is singular")
    atom_a = design.mass_a @ _at(model.f, design.a)
    atom_b = design.mass_b @ _at(model.f, design.b)
    B = _measure_covariance(
        kernel,
        atom_a,
        atom_b,
        lambda t: np.einsum("kln,ln->kn", design.density(t), model.f(t)),
    )
    inv = np.linalg.inv(info)
    D = inv @ B @ inv.T
    return 0.5 * (D + D.T)


# Doob transforms -----------------------------------------------------------


def design_doob_transform(design: AnyDesign, doob: DoobMap) -> AnyDesign:
    """Carry a design on ``doob.source`` to the time scale of ``doob.target``.

    Locations move by ``beta``; weights are multiplied by ``alpha**2`` at the
    original location, and densities pick up the Jacobian of ``beta~``. Paired
    with :func:`tridesign.model.transform_model` the variance is unchanged.
    """

    fwd, back = doob.forward, doob.backward

    if isinstance(design, SignedDesign):
        alpha = fwd.alpha(design.points)
        return SignedDesign(fwd.beta(design.points), alpha**2 * design.weights)

    a, b = doob.target.a, doob.target.b
    scale_a = float(fwd.alpha(np.array([design.a]))[0]) ** 2
    scale_b = float(fwd.alpha(np.array([design.b]))[0]) ** 2

    def jacobian(s: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        beta, dbeta, _, alpha, _, _ = back.derivatives(s)
        return beta, dbeta / alpha**2

    if isinstance(design, LimitingDesign):
        density = design.density

        def scalar_density(s: NDArray[np.float64]) -> NDArray[np.float64]:
            beta, factor = jacobian(s)
            return density(beta) * factor

        breaks = tuple(float(x) for x in fwd.beta(np.array(design.breakpoints)))
        return LimitingDesign(
            a=a,
            b=b,
            mass_a=scale_a * design.mass_a,
            mass_b=scale_b * design.mass_b,
            density=scalar_density,
            c=design.c,
            breakpoints=breaks,
        )

    if isinstance(design, MatrixLimitingDesign):
        matrix = design.density

        def matrix_density(s: NDArray[np.float64]) -> NDArray[np.float64]:
            beta, factor = jacobian(np.atleast_1d(s))
            return matrix(beta) * factor

        return MatrixLimitingDesign(
            a=a,
            b=b,
            mass_a=scale_a * design.mass_a,
            mass_b=scale_b * design.mass_b,
            density=matrix_density,
            representation=design.representation,
            c=design.c,
        )

    raise TypeError(f"cannot transform {type(design).__name__}")
