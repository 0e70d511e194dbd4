import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import beta_cdf_quad, f_cdf_quad, gauss_solve, random_spd
from rfsmon.numerics import (
    NotPositiveDefiniteError,
    chisq_cdf,
    chisq_quantile,
    cholesky_solve,
    f_cdf,
    f_sf,
    ln_gamma,
    reg_inc_beta,
)

# oracle values: factorial product, mpmath, closed-form chi2_4 CDF inverted by bisection
LN_10_FACTORIAL = 15.104412573075516
LN_SQRT_PI = 0.5723649429247
CHI2_4_Q99 = 13.276704135987627
CHI2_4_Q50 = 3.3566939800333206
CHI2_2_Q99 = 9.210340371976189


def test_ln_gamma_known_values():
    assert ln_gamma(1.0) == 0.0
    assert ln_gamma(0.5) == pytest.approx(LN_SQRT_PI, abs=1e-12)
    assert ln_gamma(11.0) == pytest.approx(LN_10_FACTORIAL, abs=1e-12)


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5, float("nan"), float("inf")])
def test_ln_gamma_domain(x):
    with pytest.raises(ValueError):
        ln_gamma(x)


def test_ln_gamma_against_mpmath(rng):
    import mpmath as mp

    for x in np.exp(rng.uniform(math.log(1e-3), math.log(1e6), 300)):
        ref = float(mp.loggamma(mp.mpf(x)))
        # absolute 1e-12 is below one ulp once |lgamma| exceeds ~4000
        assert abs(ln_gamma(x) - ref) <= max(1e-12, 4 * math.ulp(ref))


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.1, max_value=1e4))
def test_ln_gamma_recurrence(x):
    lhs = ln_gamma(x + 1) - ln_gamma(x) - math.log(x)
    assert abs(lhs) <= 1e-10 * max(1.0, abs(ln_gamma(x + 1)) * 1e-3)


def test_reg_inc_beta_examples():
    assert reg_inc_beta(1.0, 2.5, 7.0) == 1.0
    assert reg_inc_beta(0.0, 2.5, 7.0) == 0.0
    assert reg_inc_beta(0.5, 3, 3) == pytest.approx(0.5, abs=1e-14)
    expected = beta_cdf_quad(0.25, 2, 3)
    assert expected == pytest.approx(0.26171875, abs=1e-14)
    assert reg_inc_beta(0.25, 2, 3) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("args", [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -2)])
def test_reg_inc_beta_domain(args):
    with pytest.raises(ValueError):
        reg_inc_beta(*args)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.05, max_value=200.0),
    st.floats(min_value=0.05, max_value=200.0),
)
def test_reg_inc_beta_reflection(x, a, b):
    # make x and 1 - x both exactly representable
    x = 1.0 - (1.0 - x)
    assert abs(reg_inc_beta(x, a, b) + reg_inc_beta(1.0 - x, b, a) - 1.0) <= 1e-10


def test_f_cdf_examples():
    assert f_cdf(0.0, 3, 7) == 0.0
    assert f_cdf(1.0, 5, 5) == pytest.approx(0.5, abs=1e-14)
    expected = f_cdf_quad(3.0, 2, 10)
    assert f_cdf(3.0, 2, 10) == pytest.approx(expected, abs=1e-10)
    assert f_sf(3.0, 2, 10) == pytest.approx(1.6**-5, rel=1e-12)
    with pytest.raises(ValueError):
        f_cdf(-1.0, 2, 3)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=50.0), min_size=2, max_size=20),
    st.floats(min_value=0.5, max_value=30.0),
    st.floats(min_value=0.5, max_value=200.0),
)
def test_f_cdf_monotone(ys, d1, d2):
    vals = [f_cdf(y, d1, d2) for y in sorted(ys)]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 for v in vals)


def test_f_sf_complements_cdf(rng):
    for _ in range(200):
        y, d1, d2 = rng.uniform(0, 20), rng.uniform(0.5, 20), rng.uniform(0.5, 100)
        assert f_cdf(y, d1, d2) + f_sf(y, d1, d2) == pytest.approx(1.0, abs=1e-12)


def test_chisq_quantile_examples():
    assert chisq_quantile(0.0, 4) == 0.0
    assert chisq_quantile(0.99, 4) == pytest.approx(CHI2_4_Q99, abs=1e-9)
    assert chisq_quantile(0.5, 4) == pytest.approx(CHI2_4_Q50, abs=1e-9)
    assert chisq_quantile(0.99, 2) == pytest.approx(CHI2_2_Q99, abs=1e-9)
    for p in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            chisq_quantile(p, 4)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1 - 1e-9), st.integers(min_value=1, max_value=60))
def test_chisq_round_trip(p, k):
    q = chisq_quantile(p, k)
    assert abs(chisq_cdf(q, k) - p) <= 1e-7


def test_chisq_quantile_monotone():
    ps = np.linspace(0, 0.999, 200)
    qs = [chisq_quantile(p, 4) for p in ps]
    assert all(b > a for a, b in zip(qs, qs[1:]))


def test_cholesky_solve_examples(rng):
    x, logdet = cholesky_solve(np.eye(2), np.array([3.0, 4.0]))
    np.testing.assert_allclose(x, [3.0, 4.0])
    assert logdet == 0.0
    x, logdet = cholesky_solve(np.diag([4.0, 9.0]), np.array([4.0, 9.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-15)
    assert logdet == pytest.approx(math.log(36.0))
    a = random_spd(rng, 3)
    b = rng.standard_normal(3)
    x, logdet = cholesky_solve(a, b)
    np.testing.assert_allclose(x, gauss_solve(a, b), rtol=1e-10, atol=1e-12)
    assert logdet == pytest.approx(math.log(np.linalg.det(a)), abs=1e-10)


def test_cholesky_solve_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))
    with pytest.raises(ValueError):
        cholesky_solve(np.array([[1.0, 0.5], [0.0, 1.0]]), np.ones(2))


@pytest.mark.parametrize("dim", [1, 2, 3, 5, 8, 16])
def test_cholesky_solve_round_trip(rng, dim):
    for cond in (1.0, 1e3, 1e6):
        a = random_spd(rng, dim, cond=cond)
        x = rng.standard_normal(dim)
        got, _ = cholesky_solve(a, a @ x)
        assert np.linalg.norm(got - x) <= 1e-9 * np.linalg.norm(x)
        resid = np.linalg.norm(a @ got - a @ x) / np.linalg.norm(a @ x)
        assert resid <= 1e-10
