import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from oracles import random_spd
from rfsmon.numerics import NotPositiveDefiniteError
from rfsmon.rfs_model import (
    GaussParams,
    PointPattern,
    PoissonRfsParams,
    gaussian_logpdf,
    log_gaussian_l2_norm_sq,
    poisson_log_pmf,
    poisson_rfs_logdensity,
    ranking_log_score,
    ranking_log_scores,
)

STD2 = GaussParams.standard(2)


def explicit_logpdf(x, mu, sigma):
    d = len(mu)
    diff = np.asarray(x) - np.asarray(mu)
    return -0.5 * (d * math.log(2 * math.pi) + math.log(np.linalg.det(sigma)) + diff @ np.linalg.inv(sigma) @ diff)


def test_point_pattern_validation():
    X = PointPattern(3, [[0.0, 1.0], [2.0, 3.0]])
    assert X.n == 2 and X.dim == 2
    np.testing.assert_allclose(X.mean(), [1.0, 2.0])
    empty = PointPattern(1, [])
    assert empty.n == 0 and empty.dim is None
    with pytest.raises(ValueError):
        empty.mean()
    with pytest.raises(ValueError):
        PointPattern(0, [[0.0, 0.0]])
    with pytest.raises(ValueError):
        PointPattern(1, [0.0, 1.0])
    with pytest.raises(ValueError):
        PointPattern(1, [[np.nan, 0.0]])


def test_gaussian_logpdf_mode():
    assert gaussian_logpdf(np.zeros(2), STD2) == pytest.approx(-math.log(2 * math.pi), abs=1e-15)
    sigma = np.array([[2.0, 0.3], [0.3, 0.5]])
    g = GaussParams([1.0, -1.0], sigma)
    expected = -math.log(2 * math.pi) - 0.5 * math.log(np.linalg.det(sigma))
    assert gaussian_logpdf([1.0, -1.0], g) == pytest.approx(expected, abs=1e-13)


def test_gaussian_logpdf_random_3d(rng):
    for _ in range(50):
        sigma = random_spd(rng, 3)
        mu, x = rng.standard_normal(3), rng.standard_normal(3) * 2
        assert gaussian_logpdf(x, GaussParams(mu, sigma)) == pytest.approx(explicit_logpdf(x, mu, sigma), abs=1e-10)


def test_gaussian_logpdf_errors():
    with pytest.raises(NotPositiveDefiniteError):
        gaussian_logpdf(np.zeros(2), GaussParams(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]])))
    with pytest.raises(ValueError):
        gaussian_logpdf(np.zeros(3), STD2)


def test_poisson_rfs_logdensity_examples(rng):
    p = PoissonRfsParams(10.0, STD2)
    assert poisson_rfs_logdensity(PointPattern(1, []), p) == -10.0
    single = PointPattern(1, [[0.0, 0.0]])
    assert poisson_rfs_logdensity(single, p) == pytest.approx(-10 + math.log(10) - math.log(2 * math.pi), abs=1e-12)

    sigma = random_spd(rng, 2)
    q = PoissonRfsParams(7.5, GaussParams([0.5, -0.2], sigma))
    pts = rng.standard_normal((4, 2))
    oracle = -7.5
    for x in pts:
        oracle += math.log(7.5) + explicit_logpdf(x, [0.5, -0.2], sigma)
    assert poisson_rfs_logdensity(PointPattern(1, pts), q) == pytest.approx(oracle, abs=1e-12)


def test_l2_norm_of_standard_bivariate_by_quadrature():
    dens_sq = lambda y, x: (math.exp(-(x * x + y * y) / 2) / (2 * math.pi)) ** 2
    val, err = integrate.dblquad(dens_sq, -12, 12, -12, 12, epsabs=1e-13)
    assert val == pytest.approx(1 / (4 * math.pi), abs=1e-10)
    assert math.exp(log_gaussian_l2_norm_sq(STD2)) == pytest.approx(val, abs=1e-10)


def test_l2_norm_general_covariance_by_quadrature():
    sigma = np.array([[2.0, 0.6], [0.6, 0.7]])
    inv = np.linalg.inv(sigma)
    c = 1 / (2 * math.pi * math.sqrt(np.linalg.det(sigma)))

    def dens_sq(y, x):
        v = np.array([x, y])
        return (c * math.exp(-0.5 * v @ inv @ v)) ** 2

    val, _ = integrate.dblquad(dens_sq, -15, 15, -15, 15, epsabs=1e-13)
    assert math.exp(log_gaussian_l2_norm_sq(GaussParams(np.zeros(2), sigma))) == pytest.approx(val, rel=1e-8)


def test_ranking_log_score_examples():
    p = PoissonRfsParams(10.0, STD2)
    assert ranking_log_score(PointPattern(1, []), p) == pytest.approx(-10.0, abs=1e-14)
    got = ranking_log_score(PointPattern(1, [[0.0, 0.0]]), p)
    assert got == pytest.approx(math.log(10 * math.exp(-10)) + math.log(2), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**31))
def test_ranking_permutation_invariant(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 2)) * 2
    p = PoissonRfsParams(10.0, GaussParams([0.3, 0.1], [[1.5, 0.2], [0.2, 0.8]]))
    a = ranking_log_score(PointPattern(1, pts), p)
    b = ranking_log_score(PointPattern(1, pts[rng.permutation(n)]), p)
    assert a == pytest.approx(b, abs=1e-12)


def test_ranking_decreases_away_from_mean(rng):
    p = PoissonRfsParams(10.0, STD2)
    pts = rng.standard_normal((6, 2))
    direction = pts[2] / np.linalg.norm(pts[2])
    scores = []
    for r in np.linspace(0, 5, 20):
        moved = pts.copy()
        moved[2] = r * direction
        scores.append(ranking_log_score(PointPattern(1, moved), p))
    assert all(b < a for a, b in zip(scores, scores[1:]))


def test_poisson_cardinality_sums_to_one():
    for rate in (0.5, 2.0, 10.0, 30.0):
        total, n = 0.0, 0
        while True:
            pmf = math.exp(poisson_log_pmf(n, rate))
            total += pmf
            if n > rate and pmf < 1e-14 * 1e-3:
                break
            n += 1
        assert total == pytest.approx(1.0, abs=1e-12)


def test_vectorised_scores_match_scalar(rng):
    p = PoissonRfsParams(10.0, GaussParams([0.2, -0.4], [[1.3, 0.4], [0.4, 0.9]]))
    counts = np.array([0, 3, 1, 7, 0, 12])
    pts = rng.standard_normal((counts.sum(), 2))
    vec = ranking_log_scores(counts, pts, p)
    start = 0
    for i, n in enumerate(counts):
        X = PointPattern(1, pts[start:start + n].reshape(n, 2))
        assert vec[i] == pytest.approx(ranking_log_score(X, p), abs=1e-11)
        start += n


def test_params_validation():
    with pytest.raises(ValueError):
        PoissonRfsParams(0.0, STD2)
    with pytest.raises(ValueError):
        GaussParams(np.zeros(2), np.eye(3))
