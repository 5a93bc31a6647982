from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavysgd.analysis import median_of_means
from heavysgd.noise import TailModel, make_stream
from heavysgd.problems import LinearRegressionProblem, QuadraticProblem

PARETO = TailModel("pareto", 1.5)


def test_grad_examples():
    lr = LinearRegressionProblem(0.0, PARETO)
    assert lr.grad([1.0], [1.0, 0.2]) == pytest.approx([0.8])
    q = QuadraticProblem([[1.0]], [0.0], PARETO)
    assert q.grad([0.0], [0.0]) == pytest.approx([0.0])
    q2 = QuadraticProblem([[2.0]], [1.0], PARETO)
    assert q2.grad([3.0], [0.5]) == pytest.approx([4.5])


def test_mean_field_examples():
    q = QuadraticProblem(np.diag([1.0, 2.0]), [0.0, 0.0])
    assert q.mean_field([1.0, 1.0]) == pytest.approx([1.0, 2.0])
    assert q.mean_field(q.theta_star) == pytest.approx([0.0, 0.0])
    lr = LinearRegressionProblem(0.5, PARETO, "normal", 1.0)
    assert lr.mean_field([2.0]) == pytest.approx([1.5])
    assert np.array_equal(lr.jacobian_at_optimum(), [[1.0]])
    assert LinearRegressionProblem(0.0, None, "uniform", 3.0).second_moment == pytest.approx(3.0)
    assert LinearRegressionProblem(0.0, None, "constant", 2.0).second_moment == 4.0


def test_zeta_at_optimum():
    q = QuadraticProblem([[1.0]], [2.0], PARETO)
    assert q.zeta_at_optimum([0.7]) == pytest.approx([0.7])
    lr = LinearRegressionProblem(0.0, PARETO)
    assert lr.zeta_at_optimum([2.0, -0.1]) == pytest.approx([0.2])


def test_spectrum_and_validation():
    q = QuadraticProblem([[2.0, 0.5], [0.5, 1.0]])
    lo, hi = q.spectrum
    assert lo == pytest.approx(1.5 - np.sqrt(0.5)) and hi == pytest.approx(1.5 + np.sqrt(0.5))
    assert q.a_min == lo and q.a_max == hi
    for A in ([[1.0, 2.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]], [[1.0, 0.0, 0.0]]):
        with pytest.raises(ValueError):
            QuadraticProblem(A)
    with pytest.raises(ValueError):
        QuadraticProblem([[1.0]], [0.0, 1.0])
    with pytest.raises(ValueError):
        LinearRegressionProblem(0.0, PARETO, "cauchy")
    with pytest.raises(ValueError):
        LinearRegressionProblem([0.0, 1.0], PARETO)


def test_batched_grad_shapes():
    q = QuadraticProblem(np.diag([1.0, 3.0]), [1.0, -1.0], PARETO)
    data = q.sample_data(make_stream(1), 7)
    theta = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 3.0]])
    g = q.grad(theta, np.broadcast_to(data, (3, 7, 2)))
    assert g.shape == (3, 7, 2)
    assert np.allclose(g[1, 4], q.grad(theta[1], data[4]))
    lr = LinearRegressionProblem(0.3, PARETO)
    d = lr.sample_data(make_stream(2), 5)
    g = lr.grad(np.array([[0.0], [1.0]]), np.broadcast_to(d, (2, 5, 2)))
    assert g.shape == (2, 5, 1) and np.allclose(g[1, 3], lr.grad([1.0], d[3]))


def test_noiseless_quadratic_data_are_zero():
    q = QuadraticProblem([[1.0]])
    assert np.array_equal(q.sample_data(make_stream(0), 4), np.zeros((4, 1)))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2))
def test_taylor_remainder_vanishes(theta):
    q = QuadraticProblem([[2.0, 0.5], [0.5, 1.0]], [0.3, -0.2], PARETO)
    assert np.allclose(q.taylor_remainder(theta), 0.0, atol=1e-9 * (1 + np.abs(theta).max()))
    lr = LinearRegressionProblem(0.4, PARETO)
    assert np.allclose(lr.taylor_remainder(theta[:1]), 0.0, atol=1e-9 * (1 + abs(theta[0])))


@settings(max_examples=50, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-10, 10), st.floats(-10, 10))
def test_quadratic_noise_difference_vanishes(t1, t2, x, zeta):
    # e(theta) - e(theta*) = grad(theta) - H(theta) - (grad(theta*) - H(theta*)) = 0
    q = QuadraticProblem([[1.5]], [0.2], PARETO)
    e = q.grad([t1], [zeta]) - q.mean_field([t1])
    e_star = q.grad(q.theta_star, [zeta]) - q.mean_field(q.theta_star)
    assert e == pytest.approx(e_star, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-5, 5), st.floats(-10, 10))
def test_linear_regression_lipschitz_in_theta(t1, t2, x, eps):
    # |grad(t1) - grad(t2)| <= X**2 |t1 - t2|
    lr = LinearRegressionProblem(0.1, PARETO)
    diff = abs(lr.grad([t1], [x, eps])[0] - lr.grad([t2], [x, eps])[0])
    assert diff <= x * x * abs(t1 - t2) * (1 + 1e-12) + 1e-9


@pytest.mark.parametrize("make", [
    lambda: QuadraticProblem([[2.0, 0.5], [0.5, 1.0]], [0.3, -0.2], PARETO),
    lambda: LinearRegressionProblem(0.4, PARETO, "normal", 1.0),
    lambda: LinearRegressionProblem(-0.2, PARETO, "uniform", 2.0),
], ids=["quadratic", "linreg-normal", "linreg-uniform"])
def test_unbiased_gradient(make):
    prob = make()
    rng = make_stream(3, 0, "check")
    n = 10 ** 6
    for _ in range(5):
        theta = rng.uniform(-2, 2, prob.dim)
        g = prob.grad(theta, prob.sample_data(rng, n))
        H = prob.mean_field(theta)
        for k in range(prob.dim):
            col = g[:, k]
            # median of means with 32 groups; SE from the spread of group means,
            # inflated by ~sqrt(pi/2) for the median
            groups = col.reshape(32, -1).mean(axis=1)
            se = groups.std(ddof=1) / np.sqrt(32)
            assert abs(median_of_means(col, 32) - H[k]) < 4 * se * 1.25 + 1e-12


def test_linear_regression_centering():
    lr = LinearRegressionProblem(0.0, PARETO)
    d = lr.sample_data(make_stream(4, 0, "check"), 10 ** 6)
    z = lr.zeta_at_optimum(d)[:, 0]
    groups = z.reshape(32, -1).mean(axis=1)
    assert abs(median_of_means(z, 32)) < 4 * 1.25 * groups.std(ddof=1) / np.sqrt(32)
