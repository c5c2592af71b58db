from __future__ import annotations

import numpy as np
import pytest

from tridesign.asymptotic import limiting_design, matrix_limiting_design
from tridesign.covmat import build_sigma
from tridesign.design import SignedDesign, optimal_mwe_vectors
from tridesign.discretize import finite_plan, matrix_finite_plan, plan_variance
from tridesign.estimators import blue, design_matrix
from tridesign.exceptions import DomainError
from tridesign.kernel import brownian, exp_pair, power_pair
from tridesign.model import linear, location, monomial, quadratic, trig
from tridesign.simulate import (
    blue_criterion,
    block_generator,
    monte_carlo_variance,
    optimize_exact_blue_design,
    sample_gp,
)


def test_sample_gp_covariance() -> None:
    kernel = brownian(1, 2)
    draws = sample_gp(kernel, [1.0, 2.0], seed=3, size=20_000)
    assert draws.shape == (20_000, 2)
    empirical = np.cov(draws.T)
    np.testing.assert_allclose(empirical, [[1.0, 1.0], [1.0, 2.0]], atol=0.06)


def test_sample_gp_replays() -> None:
    kernel = exp_pair(1.0, 1.0, 0, 1)
    one = sample_gp(kernel, np.linspace(0, 1, 7), seed=11)
    two = sample_gp(kernel, np.linspace(0, 1, 7), seed=11)
    assert one.shape == (7,)
    np.testing.assert_array_equal(one, two)
    assert not np.array_equal(one, sample_gp(kernel, np.linspace(0, 1, 7), seed=12))


def test_block_streams_are_independent() -> None:
    a = block_generator(5, 0).standard_normal(4)
    b = block_generator(5, 1).standard_normal(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, block_generator(5, 0).standard_normal(4))


def test_monte_carlo_blue_linear_brownian() -> None:
    model, kernel = linear(1, 2), brownian(1, 2)
    points = [1.0, 1.5, 2.0]
    report = blue(design_matrix(model, points), build_sigma(kernel, points))
    result = monte_carlo_variance(report, model, kernel, theta=[2.0], reps=20_000, seed=7)
    assert result.analytic_covariance[0, 0] == pytest.approx(0.5)
    assert abs(result.covariance[0, 0] - 0.5) <= 3 * result.covariance_se[0, 0]
    assert result.covariance_within()
    assert result.mean_within()
    payload = result.to_dict()
    assert payload["reps"] == 20_000 and payload["theta"] == [2.0]


def test_monte_carlo_plan_matches_plan_variance() -> None:
    model, kernel = quadratic(1.0, 1, 2), brownian(1, 2)
    plan = finite_plan(limiting_design(model, kernel), 4)
    result = monte_carlo_variance(plan, model, kernel, theta=[1.0], reps=20_000, seed=1)
    exact = plan_variance(plan, model, kernel)
    assert result.analytic_covariance[0, 0] == pytest.approx(exact, rel=1e-12)
    assert abs(result.covariance[0, 0] - exact) <= 3 * result.covariance_se[0, 0]


def _blue_linear_brownian():
    model, kernel = linear(1, 2), brownian(1, 2)
    points = [1.0, 1.5, 2.0]
    return blue(design_matrix(model, points), build_sigma(kernel, points)), model, kernel


def _quadratic_plan():
    model, kernel = quadratic(1.0, 1, 2), brownian(1, 2)
    return finite_plan(limiting_design(model, kernel), 4), model, kernel


def _trig_power_plan():
    model, kernel = trig(1, 2), power_pair(2.0, 1.0, 1, 2)
    return finite_plan(limiting_design(model, kernel), 6), model, kernel


def _thinned_matrix_plan():
    model, kernel = monomial(3, 1, 2), exp_pair(1.0, 1.0, 1, 2)
    return matrix_finite_plan(matrix_limiting_design(model, kernel), 6), model, kernel


def _one_column_mwe():
    model, kernel = monomial(2, 1, 2), exp_pair(1.0, 1.0, 1, 2)
    return optimal_mwe_vectors(model, kernel, np.linspace(1, 2, 5)), model, kernel


@pytest.mark.parametrize(
    "case",
    [_blue_linear_brownian, _quadratic_plan, _trig_power_plan, _thinned_matrix_plan,
     _one_column_mwe],
    ids=["blue", "quadratic-plan", "trig-plan", "thinned-mwe", "one-column-mwe"],
)
def test_monte_carlo_matches_analytic_covariance(case) -> None:  # type: ignore[no-untyped-def]
    target, model, kernel = case()
    theta = np.linspace(0.5, 1.5, model.m)
    result = monte_carlo_variance(target, model, kernel, theta=theta, reps=100_000, seed=20)
    assert result.covariance.shape == (model.m, model.m)
    assert result.covariance_within()

    again = monte_carlo_variance(target, model, kernel, theta=theta, reps=100_000, seed=20)
    np.testing.assert_array_equal(result.covariance, again.covariance)


def test_standard_errors_halve_with_four_times_the_reps() -> None:
    target, model, kernel = _thinned_matrix_plan()
    theta = np.ones(model.m)
    small = monte_carlo_variance(target, model, kernel, theta=theta, reps=25_000, seed=4)
    large = monte_carlo_variance(target, model, kernel, theta=theta, reps=100_000, seed=4)
    np.testing.assert_allclose(small.covariance_se / large.covariance_se, 2.0, rtol=0.2)
    np.testing.assert_allclose(small.mean_se / large.mean_se, 2.0, rtol=0.2)


def test_monte_carlo_does_not_depend_on_workers() -> None:
    model, kernel = linear(1, 2), exp_pair(1.0, 1.0, 1, 2)
    design = SignedDesign([1.0, 1.4, 2.0], [0.2, 0.3, 0.5])
    kwargs = dict(theta=[0.5], reps=5_000, seed=42, block_size=512)
    serial = monte_carlo_variance(design, model, kernel, workers=1, **kwargs)
    threaded = monte_carlo_variance(design, model, kernel, workers=4, **kwargs)
    np.testing.assert_array_equal(serial.mean, threaded.mean)
    np.testing.assert_array_equal(serial.covariance, threaded.covariance)


def test_monte_carlo_validation() -> None:
    model, kernel = linear(1, 2), brownian(1, 2)
    design = SignedDesign([1.0, 2.0], [0.5, 0.5])
    with pytest.raises(DomainError):
        monte_carlo_variance(design, model, kernel, theta=[1.0], reps=1, seed=0)
    with pytest.raises(DomainError):
        monte_carlo_variance(design, model, kernel, theta=[1.0, 2.0], reps=10, seed=0)


# Exact-design baseline -----------------------------------------------------


def test_single_point_moves_to_the_right_end() -> None:
    # Var = t / t^2 for f(t) = t under Brownian motion
    result = optimize_exact_blue_design(linear(1, 2), brownian(1, 2), 1, restarts=3)
    assert result.value == pytest.approx(0.5, rel=1e-4)
    assert result.points[0] == pytest.approx(2.0, abs=1e-3)


def test_two_points_are_the_endpoints() -> None:
    model, kernel = quadratic(1.0, 1, 2), brownian(1, 2)
    result = optimize_exact_blue_design(model, kernel, 2)
    np.testing.assert_allclose(result.points, [1.0, 2.0])
    assert result.converged
    assert result.value == pytest.approx(blue_criterion(model, kernel, [1.0, 2.0]))


def test_four_points_beat_the_quantile_plan() -> None:
    model, kernel = quadratic(1.0, 1, 2), brownian(1, 2)
    plan = finite_plan(limiting_design(model, kernel), 2)
    result = optimize_exact_blue_design(
        model, kernel, 4, restarts=4, seed=2, initial=plan.points[1:-1]
    )
    assert result.points[0] == 1.0 and result.points[-1] == 2.0
    assert np.all(np.diff(result.points) > 0)
    assert result.value <= blue_criterion(model, kernel, plan.points) + 1e-12
    assert result.value > 3 / 40


def test_location_brownian_baseline() -> None:
    result = optimize_exact_blue_design(location(1, 2), brownian(1, 2), 3, restarts=2)
    assert result.value == pytest.approx(1.0, rel=1e-9)


def test_optimizer_validation() -> None:
    with pytest.raises(DomainError):
        optimize_exact_blue_design(monomial(3, 1, 2), brownian(1, 2), 2)
    with pytest.raises(DomainError):
        optimize_exact_blue_design(linear(1, 2), brownian(1, 2), 4, initial=[1.5])
