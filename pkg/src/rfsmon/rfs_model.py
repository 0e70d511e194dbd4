"""Poisson random-finite-set likelihood and the ranking-function score."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rfsmon.numerics import cholesky, log_det_from_cholesky, solve_lower

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PointPattern:
    """One set-valued observation: a time index and an unordered point list.

    ``points`` is stored as an ``(n, d)`` float array. An empty pattern has
    shape ``(0, d)`` when the dimension is known and ``(0, 0)`` otherwise.
    """

    t: int
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 0)
        elif pts.ndim == 1:
            raise ValueError("points must be a 2-d array of shape (n, d)")
        if pts.ndim != 2:
            raise ValueError(f"points must have shape (n, d), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if int(self.t) < 1:
            raise ValueError(f"time index must be >= 1, got {self.t}")
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int | None:
        return self.points.shape[1] if self.points.shape[1] else None

    def mean(self) -> np.ndarray:
        if self.n == 0:
            raise ValueError("sample mean of an empty pattern is undefined")
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class GaussParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(f"covariance shape {sigma.shape} does not match mean of length {mu.size}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.size

    @classmethod
    def standard(cls, dim: int = 2) -> "GaussParams":
        return cls(np.zeros(dim), np.eye(dim))


@dataclass(frozen=True)
class PoissonRfsParams:
    rate: float
    gauss: GaussParams

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"Poisson rate must be positive, got {self.rate}")


def gaussian_logpdf(x, g: GaussParams) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != g.mu.shape:
        raise ValueError(f"point of shape {x.shape} does not match dimension {g.dim}")
    chol = cholesky(g.sigma)
    z = solve_lower(chol, x - g.mu)
    return -0.5 * (g.dim * LOG_2PI + log_det_from_cholesky(chol) + float(z @ z))


def gaussian_logpdf_rows(points: np.ndarray, g: GaussParams) -> np.ndarray:
    """Vectorised log-density for every row of an ``(n, d)`` array."""
    points = np.asarray(points, dtype=float)
    chol = cholesky(g.sigma)
    z = np.linalg.solve(chol, (points - g.mu).T)
    maha = np.sum(z * z, axis=0)
    return -0.5 * (g.dim * LOG_2PI + log_det_from_cholesky(chol) + maha)


def poisson_log_pmf(n: int, rate: float) -> float:
    return -rate + n * math.log(rate) - math.lgamma(n + 1.0)


def poisson_rfs_logdensity(X: PointPattern, p: PoissonRfsParams) -> float:
    """log f(X) = -rate + sum_j [log rate + log N(x_j; mu, Sigma)]."""
    if X.n == 0:
        return -p.rate
    return -p.rate + X.n * math.log(p.rate) + float(np.sum(gaussian_logpdf_rows(X.points, p.gauss)))


def log_gaussian_l2_norm_sq(g: GaussParams) -> float:
    """log of the squared L2 norm of the Gaussian density: (4 pi)^{-d/2} |Sigma|^{-1/2}."""
    chol = cholesky(g.sigma)
    return -0.5 * g.dim * math.log(4.0 * math.pi) - 0.5 * log_det_from_cholesky(chol)


def ranking_log_score(X: PointPattern, p: PoissonRfsParams) -> float:
    """Log ranking function with the proportionality constant set to 1.

    r(X) = rho(n) prod_x p(x) / (||p||^2)^n, with rho the Poisson pmf.
    """
    log_rho = poisson_log_pmf(X.n, p.rate)
    if X.n == 0:
        return log_rho
    log_lik = float(np.sum(gaussian_logpdf_rows(X.points, p.gauss)))
    return log_rho + log_lik - X.n * log_gaussian_l2_norm_sq(p.gauss)


def ranking_log_scores(counts: np.ndarray, points: np.ndarray, p: PoissonRfsParams) -> np.ndarray:
    """Ranking scores for many patterns stored back to back.

    ``counts[i]`` points of pattern ``i`` occupy consecutive rows of ``points``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    log_fact = np.array([math.lgamma(k + 1.0) for k in range(int(counts.max(initial=0)) + 1)])
    log_rho = -p.rate + counts * math.log(p.rate) - log_fact[counts]
    per_point = gaussian_logpdf_rows(points, p.gauss) - log_gaussian_l2_norm_sq(p.gauss)
    pattern_id = np.repeat(np.arange(counts.size), counts)
    sums = np.bincount(pattern_id, weights=per_point, minlength=counts.size)
    return log_rho + sums
