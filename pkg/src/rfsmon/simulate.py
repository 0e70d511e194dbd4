"""Seedable generators for in-control and out-of-control pattern streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rfsmon.numerics import cholesky
from rfsmon.rfs_model import GaussParams, PointPattern, PoissonRfsParams

IC_RATE = 10.0

# kind -> (out-of-control rate or None, out-of-control mean or None)
OOC_OVERRIDES = {
    "s1": (None, (1.0, 1.0)),
    "s2": (20.0, None),
    "s3": (2.0, None),
    "s4": (15.0, (1.0, 1.0)),
    "s5": (5.0, (1.0, 1.0)),
    "fig2": (16.0, (1.0, 0.5)),
}
ANOMALY_KINDS = ("s1", "s2", "s3", "s4", "s5")
KINDS = ("ic", *ANOMALY_KINDS, "fig1", "fig2")

FIG1_SEGMENTS = (50, 30, 20)
FIG1_LEVELS = (10.0, 12.0, 5.0)

# the five in-control sets of the worked example: (cardinality, sample mean)
FIG2_PATTERNS = (
    (9, (0.21, 0.05)),
    (7, (0.48, -0.18)),
    (11, (-0.30, -0.15)),
    (10, (0.54, 0.21)),
    (8, (-0.26, -0.09)),
    (16, (0.97, 0.50)),
)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by a seed and a key path.

    Streams with different keys are statistically independent; the mapping
    does not depend on the order in which streams are created, so batches
    can be generated in any order or in parallel.
    """

    seed: int
    key: tuple[int, ...] = ()

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_poisson(lam: float, rng) -> int:
    if not lam > 0:
        raise ValueError(f"Poisson rate must be positive, got {lam}")
    return int(_as_generator(rng).poisson(lam))


def sample_mvn(g: GaussParams, rng, size: int | None = None) -> np.ndarray:
    """Draw from N(mu, Sigma) as mu + L z with L the Cholesky factor."""
    chol = cholesky(g.sigma)
    gen = _as_generator(rng)
    if size is None:
        return g.mu + chol @ gen.standard_normal(g.dim)
    return g.mu + gen.standard_normal((size, g.dim)) @ chol.T


def gen_pattern(t: int, rate: float, g: GaussParams, rng: np.random.Generator) -> PointPattern:
    n = int(rng.poisson(rate))
    return PointPattern(t, sample_mvn(g, rng, size=n))


def fig1_rates(ramp_steps: int | None = 3) -> np.ndarray:
    """Rate schedule 10 -> 12 -> 5 over 50 + 30 + 20 steps.

    With ``ramp_steps`` set, each change is a raised-cosine transition of
    that many steps followed by a plateau at the new level. ``None`` spreads
    a linear ramp over the whole segment instead.
    """
    n0, n1, n2 = FIG1_SEGMENTS
    l0, l1, l2 = FIG1_LEVELS

    def segment(start, stop, length):
        if ramp_steps is None:
            return start + (stop - start) * np.arange(1, length + 1) / length
        k = min(ramp_steps, length)
        s = np.arange(1, k + 1) / k
        ramp = start + (stop - start) * (1.0 - np.cos(np.pi * s)) / 2.0
        return np.concatenate([ramp, np.full(length - k, stop)])

    return np.concatenate([np.full(n0, l0), segment(l0, l1, n1), segment(l1, l2, n2)])


@dataclass(frozen=True)
class ScenarioSpec:
    """Stream description: in-control steps everywhere except ``change_time``.

    For the anomaly kinds only the observation at ``change_time`` is drawn
    from the out-of-control law; the process returns to control afterwards.
    """

    kind: str = "ic"
    horizon: int = 30
    change_time: int | None = None
    rate: float = IC_RATE
    dim: int = 2
    ooc_rate: float | None = None
    ooc_mean: tuple[float, ...] | None = None
    ramp_steps: int | None = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.kind in ("ic", "fig1"):
            if self.change_time is not None:
                raise ValueError(f"scenario {self.kind!r} takes no change time")
        else:
            if self.change_time is None or not 2 <= self.change_time <= self.horizon:
                raise ValueError(f"change time must satisfy 2 <= t_c <= horizon, got {self.change_time}")
        if self.kind == "fig1" and self.horizon != sum(FIG1_SEGMENTS):
            raise ValueError(f"fig1 horizon is fixed at {sum(FIG1_SEGMENTS)}")
        if self.ooc_mean is not None and len(self.ooc_mean) != self.dim:
            raise ValueError("out-of-control mean has the wrong dimension")

    @classmethod
    def make(cls, kind: str, horizon: int = 30, change_time: int | None = None, **kw) -> "ScenarioSpec":
        if kind == "fig1":
            horizon = sum(FIG1_SEGMENTS)
        if kind in OOC_OVERRIDES:
            rate, mean = OOC_OVERRIDES[kind]
            kw.setdefault("ooc_rate", rate)
            kw.setdefault("ooc_mean", mean)
        return cls(kind=kind, horizon=horizon, change_time=change_time, **kw)

    @property
    def ic_params(self) -> PoissonRfsParams:
        return PoissonRfsParams(self.rate, GaussParams.standard(self.dim))

    def ooc_params(self) -> PoissonRfsParams:
        rate = self.rate if self.ooc_rate is None else self.ooc_rate
        mu = np.zeros(self.dim) if self.ooc_mean is None else np.asarray(self.ooc_mean, dtype=float)
        return PoissonRfsParams(rate, GaussParams(mu, np.eye(self.dim)))

    def rates(self) -> np.ndarray:
        if self.kind == "fig1":
            return fig1_rates(self.ramp_steps)
        return np.full(self.horizon, self.rate)


def gen_batch(spec: ScenarioSpec, rng) -> list[PointPattern]:
    gen = _as_generator(rng)
    ic = spec.ic_params
    rates = spec.rates()
    ooc = spec.ooc_params() if spec.change_time is not None else None
    out = []
    for t in range(1, spec.horizon + 1):
        if t == spec.change_time:
            out.append(gen_pattern(t, ooc.rate, ooc.gauss, gen))
        else:
            out.append(gen_pattern(t, rates[t - 1], ic.gauss, gen))
    return out


def sample_patterns(params: PoissonRfsParams, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Many independent patterns at once: ``(counts, stacked points)``."""
    gen = _as_generator(rng)
    counts = gen.poisson(params.rate, size=count)
    points = sample_mvn(params.gauss, gen, size=int(counts.sum()))
    return counts, points


def fig2_example(rng) -> list[PointPattern]:
    """The worked example: fixed cardinalities and sample means.

    Points are standard-normal draws recentred so that each pattern's sample
    mean equals the tabulated one exactly; only the scatter is random.
    """
    gen = _as_generator(rng)
    out = []
    for t, (n, mean) in enumerate(FIG2_PATTERNS, start=1):
        z = gen.standard_normal((n, 2))
        out.append(PointPattern(t, z - z.mean(axis=0) + np.asarray(mean)))
    return out
