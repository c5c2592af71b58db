"""Reference tables against hand-derived closed forms."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from tridesign.asymptotic import brownian_limiting_design
from tridesign.exceptions import ConfigurationError
from tridesign.model import linear, quadratic, trig
from tridesign.tables import TABLE_INTERVAL, TABLE_KERNELS, table_designs, table_frame

T = np.linspace(1.05, 1.95, 10)


def test_every_table_has_every_kernel() -> None:
    for number in (1, 2, 3, 4):
        rows = table_designs(number)
        assert set(rows) == set(TABLE_KERNELS)
        for _, design in rows.values():
            assert design.total_variation == pytest.approx(1.0, rel=1e-9)


def test_table_1_location() -> None:
    rows = table_designs(1)
    brownian = rows["brownian"][1]
    assert (brownian.mass_a, brownian.mass_b) == pytest.approx((1.0, 0.0))

    # u = e^t, v = e^-t: atoms and density are all 1/2 before normalization
    ou = rows["exp"][1]
    assert (ou.mass_a, ou.mass_b) == pytest.approx((1 / 3, 1 / 3), rel=1e-8)
    np.testing.assert_allclose(ou.density(T), 1 / 3, rtol=1e-8)

    # u = 0.5 + t, v = 1 + t: h'/q' is constant, atoms 4/3 and -2/3
    affine = rows["affine-plus"][1]
    assert (affine.mass_a, affine.mass_b) == pytest.approx((2 / 3, -1 / 3), rel=1e-8)
    np.testing.assert_allclose(affine.density(T), 0.0, atol=1e-12)

    # u = e^t, v = 1: constant h, everything on the left endpoint
    exp_v1 = rows["exp-v1"][1]
    assert (exp_v1.mass_a, exp_v1.mass_b) == pytest.approx((1.0, 0.0), abs=1e-12)


def test_table_2_linear() -> None:
    ou = table_designs(2)["exp"][1]
    # raw design: P_a = 0, P_b = 3/4, p = 1/2
    assert ou.mass_a == pytest.approx(0.0, abs=1e-12)
    assert ou.mass_b == pytest.approx(0.6, rel=1e-8)
    np.testing.assert_allclose(ou.density(T), 0.4, rtol=1e-8)


def test_brownian_rows_match_closed_form() -> None:
    for number, model in ((2, linear(1, 2)), (3, quadratic(1.0, 1, 2)), (4, trig(1, 2))):
        design = table_designs(number)["brownian"][1]
        closed = brownian_limiting_design(model)
        assert design.mass_a == pytest.approx(closed.mass_a, rel=1e-8, abs=1e-14)
        assert design.mass_b == pytest.approx(closed.mass_b, rel=1e-8, abs=1e-14)
        np.testing.assert_allclose(design.density(T), closed.density(T), rtol=1e-8, atol=1e-14)


def test_table_3_quadratic_brownian_row() -> None:
    design = table_designs(3)["brownian"][1]
    total = 0.8 + 2 * (np.arctan(2) - np.arctan(1))
    assert design.mass_b == pytest.approx(-0.8 / total, rel=1e-10)
    np.testing.assert_allclose(design.density(T), 2 / (total * (T**2 + 1)), rtol=1e-10)


def test_table_4_sign_changes() -> None:
    rows = table_designs(4)
    assert rows["brownian"][1].breakpoints == pytest.approx((1.5,), abs=1e-9)
    power = rows["power"][1].breakpoints
    assert len(power) >= 1
    assert min(abs(x - 1.5) for x in power) < 0.06


def test_table_frame() -> None:
    frame = table_frame(3, samples=5)
    assert list(frame.columns) == ["table", "kernel", "quantity", "t", "value"]
    assert len(frame) == len(TABLE_KERNELS) * (2 + 5)
    row = frame[(frame.kernel == "brownian") & (frame.quantity == "P_a")]
    assert float(row.value.iloc[0]) == 0.0


def test_unknown_table() -> None:
    with pytest.raises(ConfigurationError):
        table_designs(5)


# Closed forms --------------------------------------------------------------
#
# For u, v on [1, 2] with W = u'v - uv', the unnormalized design is
# P_a = (f u' - f' u) / (u W f) at a, P_b = (f' v - f v') / (v W f) at b and
# p = -((f' v - f v') / W)' / (v f).  Each entry below is that expression
# worked out by hand for one kernel row.

TWO_PI = 2.0 * np.pi

MODELS = {
    1: (lambda t: np.ones_like(t), lambda t: np.zeros_like(t), lambda t: np.zeros_like(t)),
    2: (lambda t: t, lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
    3: (lambda t: t**2 + 1.0, lambda t: 2.0 * t, lambda t: np.full_like(t, 2.0)),
    4: (
        lambda t: 1.0 + 0.5 * np.sin(TWO_PI * t),
        lambda t: np.pi * np.cos(TWO_PI * t),
        lambda t: -2.0 * np.pi**2 * np.sin(TWO_PI * t),
    ),
}


def _brownian(f, df, d2f, a, b):
    return (f(a) - a * df(a)) / a, df(b), lambda t: -d2f(t)


def _affine_plus(f, df, d2f, a, b):
    # u = 0.5 + t, v = 1 + t, W = 0.5
    return (
        (f(a) - (0.5 + a) * df(a)) / ((0.5 + a) * 0.5),
        ((1.0 + b) * df(b) - f(b)) / ((1.0 + b) * 0.5),
        lambda t: -d2f(t) / 0.5,
    )


def _affine_minus(f, df, d2f, a, b):
    # u = 1 + t, v = 3 - t, W = 4
    return (
        (f(a) - (1.0 + a) * df(a)) / ((1.0 + a) * 4.0),
        ((3.0 - b) * df(b) + f(b)) / ((3.0 - b) * 4.0),
        lambda t: -d2f(t) / 4.0,
    )


def _power(f, df, d2f, a, b):
    # u = t^2, v = t, W = t^2
    return (
        (2.0 * f(a) - a * df(a)) / a**3,
        (b * df(b) - f(b)) / b**3,
        lambda t: -d2f(t) / t**2 + 2.0 * (t * df(t) - f(t)) / t**4,
    )


def _exp_v1(f, df, d2f, a, b):
    # u = e^t, v = 1, W = e^t
    return (
        (f(a) - df(a)) * np.exp(-a),
        df(b) * np.exp(-b),
        lambda t: (df(t) - d2f(t)) * np.exp(-t),
    )


def _exp(f, df, d2f, a, b):
    # u = e^t, v = e^-t, W = 2
    return (f(a) - df(a)) / 2.0, (df(b) + f(b)) / 2.0, lambda t: (f(t) - d2f(t)) / 2.0


CLOSED_FORMS = {
    "brownian": _brownian,
    "affine-plus": _affine_plus,
    "affine-minus": _affine_minus,
    "power": _power,
    "exp-v1": _exp_v1,
    "exp": _exp,
}


def _zeros(func, a: float, b: float) -> list[float]:
    grid = np.linspace(a, b, 2001)
    values = func(grid)
    flips = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)
    return [brentq(func, grid[i], grid[i + 1], xtol=1e-14) for i in flips]


def _closed_form(number: int, label: str):
    a, b = TABLE_INTERVAL
    f, df, d2f = MODELS[number]
    at = np.array
    num_a, num_b, num = CLOSED_FORMS[label](f, df, d2f, at(a), at(b))
    mass_a, mass_b = float(num_a / f(at(a))), float(num_b / f(at(b)))

    def density(t):
        t = np.asarray(t, dtype=float)
        return num(t) / f(t)

    points = _zeros(density, a, b) or None
    opts = dict(limit=200, epsabs=0.0, epsrel=1e-12, points=points)
    spread = quad(lambda t: abs(density(t)), a, b, **opts)[0]
    signed = quad(density, a, b, **opts)[0]
    total = abs(mass_a) + abs(mass_b) + spread
    if spread > 1e-12 * max(1.0, total):
        sign = 1.0 if signed >= 0 else -1.0
    else:
        sign = 1.0 if mass_a + mass_b >= 0 else -1.0
    k = sign / total
    return k * mass_a, k * mass_b, lambda t: k * density(t)


@pytest.mark.parametrize("label", list(CLOSED_FORMS))
@pytest.mark.parametrize("number", [1, 2, 3, 4])
def test_every_row_matches_closed_form(number: int, label: str) -> None:
    design = table_designs(number)[label][1]
    mass_a, mass_b, density = _closed_form(number, label)
    assert design.mass_a == pytest.approx(mass_a, rel=1e-8, abs=1e-12)
    assert design.mass_b == pytest.approx(mass_b, rel=1e-8, abs=1e-12)
    np.testing.assert_allclose(design.density(T), density(T), rtol=1e-8, atol=1e-10)
