"""Power-discounted conjugate posteriors for the Poisson point-pattern model.

Past observations enter the posterior with weight ``alpha0 ** age``; the prior
itself carries weight ``alpha0 ** t``. Both blocks stay conjugate:

* the rate gets a Gamma(shape=c, rate=d) posterior,
* the spatial (mean, covariance) block gets a Normal-Inverse-Wishart.

States keep discounted sufficient statistics rather than raw history, so an
update costs O(d^2) regardless of stream length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from rfsmon.rfs_model import PointPattern


def _check_alpha0(alpha0: float) -> float:
    alpha0 = float(alpha0)
    if not 0.0 <= alpha0 <= 1.0:
        raise ValueError(f"discount factor must lie in [0, 1], got {alpha0}")
    return alpha0


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters. Use :meth:`jeffreys` or :meth:`explicit`."""

    kind: str
    c0: float
    d0: float
    m0: np.ndarray
    l0: float
    nu0: float
    psi0: np.ndarray

    def __post_init__(self):
        if self.kind not in ("jeffreys", "explicit"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        m0 = np.atleast_1d(np.asarray(self.m0, dtype=float))
        psi0 = np.atleast_2d(np.asarray(self.psi0, dtype=float))
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "psi0", psi0)
        if not (math.isfinite(self.c0) and self.c0 > 0):
            raise ValueError(f"gamma shape c0 must be positive, got {self.c0}")
        if not (math.isfinite(self.d0) and self.d0 >= 0):
            raise ValueError(f"gamma rate d0 must be nonnegative, got {self.d0}")
        if not (math.isfinite(self.l0) and self.l0 >= 0):
            raise ValueError(f"l0 must be nonnegative, got {self.l0}")
        if not math.isfinite(self.nu0):
            raise ValueError("nu0 must be finite")
        if psi0.shape != (m0.size, m0.size):
            raise ValueError(f"psi0 shape {psi0.shape} does not match m0 of length {m0.size}")
        if not np.allclose(psi0, psi0.T, atol=1e-12):
            raise ValueError("psi0 must be symmetric")
        if m0.size and np.min(np.linalg.eigvalsh(psi0)) < -1e-12:
            raise ValueError("psi0 must be positive semi-definite")

    @property
    def dim(self) -> int:
        return self.m0.size

    @classmethod
    def jeffreys(cls, dim: int, nu0: float | None = None) -> "PriorSpec":
        """Improper Jeffreys prior: rate ~ lambda^{-1/2}, (mu, Sigma) ~ |Sigma|^{-(d+2)/2}.

        ``nu0`` defaults to ``-dim``; for d=2 this makes five in-control sets of
        ten points land exactly on nu=48.
        """
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        return cls(
            kind="jeffreys",
            c0=0.5,
            d0=0.0,
            m0=np.zeros(dim),
            l0=0.0,
            nu0=float(-dim if nu0 is None else nu0),
            psi0=np.zeros((dim, dim)),
        )

    @classmethod
    def explicit(cls, c0, d0, m0, l0, nu0, psi0) -> "PriorSpec":
        return cls("explicit", float(c0), float(d0), m0, float(l0), float(nu0), psi0)

    @classmethod
    def informative(cls, dim: int = 2) -> "PriorSpec":
        """G(50.5, 5) x NIW(0, 50, 48, 49 I): the average posterior after five
        in-control sets under the Jeffreys prior with no discounting."""
        return cls.explicit(50.5, 5.0, np.zeros(dim), 50.0, 48.0, 49.0 * np.eye(dim))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "c0": self.c0,
            "d0": self.d0,
            "m0": self.m0.tolist(),
            "l0": self.l0,
            "nu0": self.nu0,
            "psi0": self.psi0.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PriorSpec":
        return cls(
            kind=doc["kind"],
            c0=float(doc["c0"]),
            d0=float(doc["d0"]),
            m0=np.asarray(doc["m0"], dtype=float),
            l0=float(doc["l0"]),
            nu0=float(doc["nu0"]),
            psi0=np.asarray(doc["psi0"], dtype=float),
        )


@dataclass(frozen=True)
class GammaPosterior:
    """Gamma(shape=c, rate=d) posterior on the cardinality rate."""

    c: float
    d: float

    @property
    def ready(self) -> bool:
        return self.d > 0


def gamma_update(post: GammaPosterior, n_t: int, alpha0: float) -> GammaPosterior:
    alpha0 = _check_alpha0(alpha0)
    if n_t < 0:
        raise ValueError(f"cardinality must be nonnegative, got {n_t}")
    return GammaPosterior(alpha0 * post.c + n_t, alpha0 * post.d + 1.0)


def posterior_rate_mean(post: GammaPosterior) -> float:
    if not post.d > 0:
        raise ValueError("posterior rate mean is undefined before any observation under an improper prior")
    return post.c / post.d


@dataclass(frozen=True, eq=False)
class NiwPosterior:
    """Normal-Inverse-Wishart posterior with its discounted statistics.

    ``W`` is the discounted point count, ``S`` the discounted point sum, ``Q``
    the discounted sum of outer products and ``a_pow`` the prior weight
    ``alpha0 ** t``. The usual hyperparameters ``m, l, nu, psi`` are derived
    from these and the prior on construction.
    """

    prior: PriorSpec
    W: float = 0.0
    S: np.ndarray = None
    Q: np.ndarray = None
    a_pow: float = 1.0
    m: np.ndarray = field(init=False)
    l: float = field(init=False)
    nu: float = field(init=False)
    psi: np.ndarray = field(init=False)

    def __post_init__(self):
        dim = self.prior.dim
        S = np.zeros(dim) if self.S is None else np.asarray(self.S, dtype=float)
        Q = np.zeros((dim, dim)) if self.Q is None else np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "Q", Q)
        pr = self.prior
        w0 = self.a_pow * pr.l0
        l = w0 + self.W
        a = w0 * pr.m0 + S
        psi = self.a_pow * pr.psi0 + w0 * np.outer(pr.m0, pr.m0) + Q
        if l > 0:
            m = a / l
            psi = psi - np.outer(a, a) / l
        else:
            # improper prior and no points yet: location undefined
            m = np.full(dim, np.nan)
        object.__setattr__(self, "l", float(l))
        object.__setattr__(self, "nu", float(self.a_pow * pr.nu0 + self.W))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "psi", 0.5 * (psi + psi.T))

    @property
    def dim(self) -> int:
        return self.prior.dim

    @property
    def location_defined(self) -> bool:
        return self.l > 0

    @property
    def predictive_dof(self) -> float:
        return self.nu - self.dim + 1.0

    @property
    def ready(self) -> bool:
        """True when the Student-t predictive of the sample mean is proper."""
        if not self.l > 0 or not self.predictive_dof > 0:
            return False
        try:
            np.linalg.cholesky(self.psi)
        except np.linalg.LinAlgError:
            return False
        return True


def niw_from_prior(prior: PriorSpec) -> NiwPosterior:
    return NiwPosterior(prior)


def niw_update(post: NiwPosterior, X: PointPattern, alpha0: float) -> NiwPosterior:
    alpha0 = _check_alpha0(alpha0)
    if X.n and X.points.shape[1] != post.dim:
        raise ValueError(f"pattern dimension {X.points.shape[1]} does not match posterior dimension {post.dim}")
    W = alpha0 * post.W + X.n
    S = alpha0 * post.S
    Q = alpha0 * post.Q
    if X.n:
        S = S + X.points.sum(axis=0)
        Q = Q + X.points.T @ X.points
    return replace(post, W=W, S=S, Q=Q, a_pow=alpha0 * post.a_pow)


def init_prior(spec: PriorSpec, dim: int | None = None) -> tuple[GammaPosterior, NiwPosterior]:
    if dim is not None and dim != spec.dim:
        raise ValueError(f"prior has dimension {spec.dim}, requested {dim}")
    return GammaPosterior(spec.c0, spec.d0), NiwPosterior(spec)
