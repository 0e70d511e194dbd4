"""Posterior predictive checks for a new point pattern.

Two p-values are computed from the current posterior: one for the
cardinality under its Negative Binomial predictive (highest predictive
probability rule) and one for the sample mean under its Student-t
predictive (Hotelling-type statistic with an F reference). Fisher's method
combines them into a single chi-squared score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from rfsmon.numerics import chisq_quantile, f_sf, mahalanobis_sq
from rfsmon.posterior import GammaPosterior, NiwPosterior

SCALE_VARIANTS = ("derived", "paper_literal")

# pmf values within this relative distance of the observed one count as ties
TIE_RTOL = 1e-10
TAIL_MASS = 1e-12
# omitted tail mass allowed relative to the p-value
TAIL_RTOL = 1e-13
PVALUE_FLOOR = 1e-300


@dataclass(frozen=True)
class NbPredictive:
    """Negative Binomial predictive of the next cardinality.

    pmf(k) = Gamma(r+k) / (Gamma(r) k!) p^r (1-p)^k, so the mean is r(1-p)/p.
    """

    r: float
    p: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"NB size must be positive, got {self.r}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"NB probability must lie in (0, 1), got {self.p}")

    @classmethod
    def from_gamma(cls, post: GammaPosterior) -> "NbPredictive":
        if not post.d > 0:
            raise ValueError("cardinality predictive undefined while the gamma rate is 0")
        return cls(post.c, post.d / (post.d + 1.0))

    @property
    def mean(self) -> float:
        return self.r * (1.0 - self.p) / self.p

    @property
    def var(self) -> float:
        return self.r * (1.0 - self.p) / self.p**2

    def log_pmf_table(self, kmax: int) -> np.ndarray:
        """log pmf(k) for k = 0..kmax, built from the ratio recursion."""
        k = np.arange(kmax, dtype=float)
        steps = np.log((self.r + k) / (k + 1.0)) + math.log1p(-self.p)
        out = np.empty(kmax + 1)
        out[0] = self.r * math.log(self.p)
        np.cumsum(steps, out=out[1:])
        out[1:] += out[0]
        return out

    def tail_bound(self, kmax: int, log_pmf_kmax: float) -> float:
        """Upper bound on the mass above ``kmax`` (geometric bound on the pmf ratios)."""
        q = max((self.r + kmax) / (kmax + 1.0), 1.0) * (1.0 - self.p)
        if q >= 1.0:
            return math.inf
        return math.exp(log_pmf_kmax) * q / (1.0 - q)

    @cached_property
    def _table(self) -> np.ndarray:
        # start at mean + 40 sd and double until the tail is negligible
        kmax = int(math.ceil(self.mean + 40.0 * math.sqrt(self.var))) + 1
        while True:
            table = self.log_pmf_table(kmax)
            if table[-1] < table.max() and self.tail_bound(kmax, table[-1]) < TAIL_MASS:
                return table
            kmax *= 2

    def table_upto(self, k: int) -> np.ndarray:
        table = self._table
        if k < table.size:
            return table
        return self.log_pmf_table(k)


def nb_pmf(k: int, nb: NbPredictive) -> float:
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    log_p = (
        math.lgamma(nb.r + k) - math.lgamma(nb.r) - math.lgamma(k + 1.0)
        + nb.r * math.log(nb.p) + k * math.log1p(-nb.p)
    )
    return math.exp(log_p)


def cardinality_pvalue(n_obs: int, nb: NbPredictive) -> float:
    """Predictive mass of all cardinalities no more probable than ``n_obs``.

    Cardinalities strictly more probable than the observed one form the
    highest-predictive-probability set; everything else (ties included)
    counts towards the p-value. The table is extended until the mass it
    leaves out is negligible relative to the p-value itself, which matters
    for tiny lower-tail p-values whose matching upper tail lies far out.
    """
    if n_obs < 0:
        raise ValueError(f"cardinality must be nonnegative, got {n_obs}")
    table = nb.table_upto(n_obs)
    cutoff = table[n_obs] + TIE_RTOL
    while True:
        pval = float(np.sum(np.exp(table[table <= cutoff])))
        kmax = table.size - 1
        if pval == 0.0 or (table[-1] < table.max() and nb.tail_bound(kmax, table[-1]) <= TAIL_RTOL * pval):
            return min(1.0, pval)
        table = nb.log_pmf_table(2 * kmax)


class SpatialPredictive:
    """Student-t predictive of a sample mean, precomputed from a NIW posterior."""

    def __init__(self, post: NiwPosterior):
        if not post.ready:
            raise ValueError("spatial predictive requires l > 0, nu > d - 1 and positive definite psi")
        self.dim = post.dim
        self.m = post.m
        self.l = post.l
        self.dof = post.predictive_dof
        self.chol = np.linalg.cholesky(post.psi)

    def scale_factor(self, n_new: int, scale_variant: str = "derived") -> float:
        """kappa such that the predictive scale matrix is kappa * psi."""
        if scale_variant == "derived":
            return (1.0 / self.l + 1.0 / n_new) / self.dof
        if scale_variant == "paper_literal":
            return (self.l + 1.0) / (self.l * n_new * self.dof)
        raise ValueError(f"unknown scale variant {scale_variant!r}")

    def hotelling(self, x_bar, n_new: int, scale_variant: str = "derived") -> float:
        diff = np.asarray(x_bar, dtype=float) - self.m
        if diff.shape != (self.dim,):
            raise ValueError(f"sample mean has shape {diff.shape}, expected ({self.dim},)")
        kappa = self.scale_factor(n_new, scale_variant)
        return mahalanobis_sq(self.chol, diff) / (kappa * self.dim)

    def pvalue(self, x_bar, n_new: int, scale_variant: str = "derived") -> float:
        if n_new < 1:
            raise ValueError("sample mean needs at least one point")
        t2 = self.hotelling(x_bar, n_new, scale_variant)
        return f_sf(t2, self.dim, self.dof)


def feature_pvalue(x_bar, n_new: int, post: NiwPosterior, scale_variant: str = "derived") -> float | None:
    """Upper-tail F probability of the Hotelling-type statistic, or ``None``
    when the predictive is not yet proper or there are no points."""
    if scale_variant not in SCALE_VARIANTS:
        raise ValueError(f"unknown scale variant {scale_variant!r}")
    if n_new < 1 or not post.ready:
        return None
    return SpatialPredictive(post).pvalue(x_bar, n_new, scale_variant)


@lru_cache(maxsize=256)
def fisher_threshold(alpha: float, dof: int) -> float:
    return chisq_quantile(1.0 - alpha, dof)


@dataclass(frozen=True)
class CheckResult:
    """Diagnostics for one observation. ``tested`` is False during warm-up."""

    t: int
    n: int
    pr_n: float | None = None
    pr_x: float | None = None
    fisher_P: float | None = None
    dof: int = 0
    threshold: float | None = None
    alarm: bool = False
    clamped: bool = False

    @property
    def tested(self) -> bool:
        return self.fisher_P is not None

    @property
    def feature_skipped(self) -> bool:
        return self.tested and self.pr_x is None


def fisher_combine(pr_n: float, pr_x: float | None, alpha: float, t: int = 0, n: int = 0) -> CheckResult:
    """Fisher's combined score -2 sum(log p) against the chi-squared(2k) quantile."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"false-alarm rate must lie in (0, 1), got {alpha}")
    pvals = [pr_n] if pr_x is None else [pr_n, pr_x]
    clamped = False
    score = 0.0
    for pv in pvals:
        if not 0.0 <= pv <= 1.0:
            raise ValueError(f"p-value out of range: {pv}")
        if pv < PVALUE_FLOOR:
            pv = PVALUE_FLOOR
            clamped = True
        score -= 2.0 * math.log(pv)
    dof = 2 * len(pvals)
    threshold = fisher_threshold(alpha, dof)
    return CheckResult(
        t=t,
        n=n,
        pr_n=pr_n,
        pr_x=pr_x,
        fisher_P=score,
        dof=dof,
        threshold=threshold,
        alarm=score > threshold,
        clamped=clamped,
    )
