from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heavysgd import lemma_oracles as lo
from heavysgd import schedules as sch
from heavysgd.limits import products_1d
from heavysgd.noise import make_stream

vec = st.integers(1, 5).flatmap(
    lambda d: st.tuples(arrays(float, d, elements=st.floats(-1e3, 1e3)),
                        arrays(float, d, elements=st.floats(-1e3, 1e3))))


def test_signed_power_examples():
    assert np.array_equal(lo.signed_power([-2.0, 3.0], 2), [-4.0, 9.0])
    v = np.array([-1.5, 0.0, 2.5])
    assert np.array_equal(lo.signed_power(v, 1), v)
    assert np.array_equal(lo.signed_power(v, 0), [-1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        lo.signed_power(v, -1)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 4, elements=st.one_of(st.just(0.0), st.floats(1e-50, 1e3), st.floats(-1e3, -1e-50))),
       st.floats(0, 3))
def test_signed_power_preserves_sign(v, q):
    # magnitudes kept away from underflow
    out = lo.signed_power(v, q)
    assert np.all(np.sign(out) == np.sign(v))


def test_p_triangle_examples():
    lhs, rhs, holds = lo.check_p_triangle([1.0, 0.0], [0.0, 1.0], 2)
    assert lhs == pytest.approx(2.0) and rhs == pytest.approx(5.0) and holds
    x = np.array([0.3, -2.0, 1.1])
    for p in (1.0, 1.4, 2.0):
        lhs, rhs, holds = lo.check_p_triangle(x, np.zeros(3), p)
        assert lhs == pytest.approx(rhs, rel=1e-14) and holds
    with pytest.raises(ValueError):
        lo.check_p_triangle(x, x, 2.5)
    with pytest.raises(ValueError):
        lo.check_p_triangle(x, x, 1.5, norm="sup")


@settings(max_examples=300, deadline=None)
@given(vec)
def test_p_triangle_p2_identity(xy):
    # |x+y|^2 = |x|^2 + |y|^2 + 2 y.x, so rhs - lhs = 3 |y|^2 exactly
    x, y = xy
    for norm in lo.NORMS:
        lhs, rhs, _ = lo.check_p_triangle(x, y, 2.0, norm)
        scale = 1 + np.dot(x, x) + np.dot(y, y)
        assert rhs - lhs == pytest.approx(3 * np.dot(y, y), abs=1e-12 * scale)


@settings(max_examples=500, deadline=None)
@given(vec, st.floats(1.0, 2.0))
def test_p_triangle_holds_lp(xy, p):
    x, y = xy
    lhs, rhs, _ = lo.check_p_triangle(x, y, p, "lp")
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


@pytest.mark.parametrize("norm", ["lp", "euclidean_grad"])
def test_p_triangle_random_sweep(norm):
    rng = make_stream(1, 0, "check")
    n = 10 ** 6 // 5
    for d in range(1, 6):
        scale = np.exp(rng.uniform(-3, 3, (n, 1)))
        x = rng.standard_normal((n, d))
        y = scale * rng.standard_normal((n, d))
        p = rng.uniform(1, 2, n)
        lhs, rhs, _ = lo.check_p_triangle(x, y, p, norm, rtol=1e-12)
        assert np.all(lhs <= rhs)


def test_p_triangle_euclidean_counterexample():
    # componentwise cross term with the Euclidean norm: the first-order terms
    # differ, p y.(|x|^{p-2} x - x^<p-1>) > 0 here, and beat 4|y|^p
    x, y = [1.0, 0.01], [0.0, -1e-4]
    lhs, rhs, holds = lo.check_p_triangle(x, y, 1.5, "euclidean")
    assert not holds and lhs - rhs > 5e-6
    assert lo.check_p_triangle(x, y, 1.5, "lp").holds
    assert lo.check_p_triangle(x, y, 1.5, "euclidean_grad").holds
    # in one dimension all three agree
    assert lo.check_p_triangle([1.0], [-0.3], 1.5, "euclidean").holds


def test_contraction_examples():
    lhs, rhs, holds = lo.check_contraction(np.diag([1.0, 2.0]), 0.25, 1)
    assert lhs == pytest.approx(0.75) and rhs == pytest.approx(0.75) and holds
    lhs, rhs, holds = lo.check_contraction(np.diag([1.0, 2.0]), 0.0, 1.7)
    assert lhs == 1.0 and rhs == 1.0 and holds
    with pytest.raises(ValueError):
        lo.check_contraction([[1.0, 0.0], [0.0, -1.0]], 0.1, 1)
    with pytest.raises(ValueError):
        lo.check_contraction(np.diag([1.0, 2.0]), 0.6, 1)


def test_contraction_random_sweep():
    rng = make_stream(2, 0, "check")
    for _ in range(10 ** 5 // 100):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        ev = rng.uniform(0.5, 4.0, 3)
        A = (q * ev) @ q.T
        A = 0.5 * (A + A.T)
        for t in rng.uniform(0, 0.25, 33):
            for p in (1.0, 1.3, 2.0):
                lhs, rhs, _ = lo.check_contraction(A, t, p)
                assert lhs <= rhs + 1e-12


def test_toeplitz_theorem_instance():
    spec = sch.ScheduleSpec(0.5, 1.0, 1.0)
    u, v, z = lo.theorem_moment_instance(spec, 1.5, 0.5)
    r1 = lo.toeplitz_bound_ratio(u, v, z, 10 ** 5)
    r2 = lo.toeplitz_bound_ratio(u, v, z, 2 * 10 ** 5)
    assert r1.hypotheses_ok and np.isfinite(r1.ratio_max)
    assert r2.ratio_max / r1.ratio_max - 1 < 0.02


def test_toeplitz_trivial():
    rep = lo.toeplitz_bound_ratio(1.0, 1.0, 0.0, 100)
    assert rep.ratio_max == 0.0
    with pytest.raises(ValueError):
        lo.toeplitz_bound_ratio(1.0, 1.5, 0.0, 10)


def test_toeplitz_limit_instance():
    # u = 1, v = (1 - sigma gamma)^(alpha - eta), z = gamma
    spec = sch.ScheduleSpec(0.7)
    g = sch.gammas(spec, 2 * 10 ** 5)
    v = (1 - 0.5 * g) ** (1.5 - 0.1)
    r1 = lo.toeplitz_bound_ratio(1.0, v, g, 10 ** 5)
    r2 = lo.toeplitz_bound_ratio(1.0, v, g, 2 * 10 ** 5)
    assert r1.hypotheses_ok and r2.ratio_max / r1.ratio_max - 1 < 0.02


def test_toeplitz_against_direct_sum():
    rng = make_stream(3, 0, "check")
    u, v, z = rng.uniform(0.5, 2, 40), rng.uniform(0.2, 1, 40), rng.uniform(0, 1, 40)
    rep = lo.toeplitz_bound_ratio(u, v, z, 40)
    for n in (1, 7, 40):
        direct = sum(z[i] * u[i] * np.prod(v[i + 1:n]) for i in range(n))
        assert rep.ratios[n - 1] == pytest.approx(direct / u[n - 1], rel=1e-12)


def test_recursion_bound_examples():
    spec = sch.ScheduleSpec(0.5, 1.0, 1.0)
    u, v, z = lo.theorem_moment_instance(spec, 1.5, 0.5)
    rep = lo.recursion_bound_check(5.0, v, z, u, 10 ** 5)
    assert rep.hypotheses_ok and rep.bounded
    # z = 0: delta_n = delta_0 prod v, bounded by u_n when w_n is non-decreasing
    rep = lo.recursion_bound_check(5.0, v, 0.0, u, 10 ** 4)
    assert rep.hypotheses_ok and rep.bounded
    # u decreasing faster than prod v: w_n decreasing, no verdict
    rep = lo.recursion_bound_check(1.0, 0.99, 0.1, lambda i: 0.5 ** i, 200)
    assert not rep.hypotheses_ok and rep.bounded is None


def test_sandwich_i0():
    assert lo.sandwich_i0(sch.ScheduleSpec(0.5), 1.0, 0.05) == 110
    assert lo.sandwich_i0(sch.ScheduleSpec(0.7), 1.0, 0.05) == 7781
    i0 = lo.sandwich_i0(sch.ScheduleSpec(0.7), 1.0, 0.05)
    for i in (i0 - 1, i0):
        inc = 1 / sch.gamma(sch.ScheduleSpec(0.7), i + 1) - 1 / sch.gamma(sch.ScheduleSpec(0.7), i)
        assert (inc <= 0.05 / 1.05) == (i == i0)


def test_g_sandwich():
    spec = sch.ScheduleSpec(0.5)
    rep = lo.g_sandwich_check(spec, 1.0, [2000, 4000, 8000, 16000])
    assert rep.holds and rep.T == 4.0 and rep.i0 == 110
    assert rep.upper_max <= 1.05 and rep.lower_min >= 0.95


@pytest.mark.parametrize("N", [200, 1000])
def test_g_recursion_matches_definition(N):
    spec = sch.ScheduleSpec(0.6, 0.7)
    _, G = products_1d(spec, 1.2, N)
    g = sch.gammas(spec, N)
    for i in (1, N // 3, N):
        direct = g[i - 1] * sum(np.prod(1 - 1.2 * g[i:j]) for j in range(i, N + 1))
        assert G[i - 1] == pytest.approx(direct, rel=1e-11)
