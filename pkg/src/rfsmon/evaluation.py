"""Monte-Carlo comparison of predictive checks (PC) and the ranking function (RF).

Design: every batch draws one in-control stream. For each tested time ``t``
and each anomaly scenario an out-of-control pattern is drawn and tested in
place of the in-control one, against the same detector state. False
positives come from the in-control stream itself, processed exactly as the
detector would in operation.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from rfsmon.detector import Detector, DetectorConfig
from rfsmon.posterior import PriorSpec, gamma_update, posterior_rate_mean, GammaPosterior
from rfsmon.rfs_model import GaussParams, PoissonRfsParams, ranking_log_score, ranking_log_scores
from rfsmon.simulate import ANOMALY_KINDS, RngStream, ScenarioSpec, gen_batch, gen_pattern, sample_patterns

F1_CSV_VERSION = "1.0"
F1_COLUMNS = ("method", "prior", "alpha0", "scenario", "t", "tp", "fp", "fn", "f1")


def f1_score(tp: float, fp: float, fn: float) -> float:
    """2 tp / (2 tp + fp + fn); 0 when the denominator vanishes."""
    for v in (tp, fp, fn):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"rates must lie in [0, 1], got {v}")
    denom = 2.0 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


@dataclass(frozen=True)
class RfThreshold:
    level: float
    cutoff: float
    n_samples: int
    params: PoissonRfsParams

    def alarm(self, score: float) -> bool:
        return score < self.cutoff

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "cutoff": self.cutoff,
            "n_samples": self.n_samples,
            "rate": self.params.rate,
            "mu": self.params.gauss.mu.tolist(),
            "sigma": self.params.gauss.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RfThreshold":
        params = PoissonRfsParams(float(doc["rate"]), GaussParams(doc["mu"], doc["sigma"]))
        return cls(float(doc["level"]), float(doc["cutoff"]), int(doc["n_samples"]), params)


def rf_scores(params: PoissonRfsParams, n_samples: int, rng, chunk: int = 200_000) -> np.ndarray:
    gen = rng.generator() if isinstance(rng, RngStream) else np.random.default_rng(rng)
    parts = []
    left = n_samples
    while left > 0:
        k = min(chunk, left)
        counts, points = sample_patterns(params, k, gen)
        parts.append(ranking_log_scores(counts, points, params))
        left -= k
    return np.concatenate(parts)


def calibrate_rf_threshold(params: PoissonRfsParams, level: float = 0.01, n_samples: int = 1_000_000, rng=0) -> RfThreshold:
    """Empirical lower ``level``-quantile of in-control ranking scores.

    The cutoff is an order statistic chosen so that exactly
    ``floor(level * n_samples)`` calibration scores fall strictly below it.
    """
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must lie in [0, 1], got {level}")
    if n_samples < 10_000:
        raise ValueError(f"need at least 10^4 calibration samples, got {n_samples}")
    if level == 0.0:
        return RfThreshold(level, -math.inf, n_samples, params)
    if level == 1.0:
        return RfThreshold(level, math.inf, n_samples, params)
    scores = np.sort(rf_scores(params, n_samples, rng))
    k = int(math.floor(level * n_samples))
    return RfThreshold(level, float(scores[k]), n_samples, params)


@dataclass(frozen=True)
class Method:
    name: str
    prior: str
    alpha0: float | None
    config: DetectorConfig | None = None

    @property
    def label(self) -> str:
        if self.name == "RF":
            return "RF"
        return f"PC({self.prior}, a0={self.alpha0:g})"


def default_grid(alpha: float = 0.01, dim: int = 2) -> list[Method]:
    """Jeffreys and informative priors crossed with alpha0 in {0.8, 0.9, 1}."""
    out = []
    for label, prior in (("J", PriorSpec.jeffreys(dim)), ("inf", PriorSpec.informative(dim))):
        for a0 in (0.8, 0.9, 1.0):
            out.append(Method("PC", label, a0, DetectorConfig(alpha0=a0, alpha=alpha, prior=prior, dim=dim)))
    return out


def _run_batch(args) -> tuple[np.ndarray, np.ndarray]:
    b, seed, methods, scenarios, horizon, rf = args
    root = RngStream(seed, (b,))
    ic = gen_batch(ScenarioSpec.make("ic", horizon=horizon), root.child(0))
    ooc = []
    for si, kind in enumerate(scenarios):
        params = ScenarioSpec.make(kind, horizon=horizon, change_time=2).ooc_params()
        gen = root.child(1 + si).generator()
        ooc.append([None, None] + [gen_pattern(t, params.rate, params.gauss, gen) for t in range(2, horizon + 1)])

    n_methods = len(methods)
    ic_alarm = np.zeros((n_methods, horizon + 1), dtype=bool)
    ooc_alarm = np.zeros((n_methods, len(scenarios), horizon + 1), dtype=bool)
    for mi, method in enumerate(methods):
        if method.name == "RF":
            for t in range(2, horizon + 1):
                ic_alarm[mi, t] = rf.alarm(ranking_log_score(ic[t - 1], rf.params))
                for si in range(len(scenarios)):
                    ooc_alarm[mi, si, t] = rf.alarm(ranking_log_score(ooc[si][t], rf.params))
            continue
        det = Detector(method.config)
        for t in range(1, horizon + 1):
            if t >= 2:
                for si in range(len(scenarios)):
                    ooc_alarm[mi, si, t] = det.check(ooc[si][t]).alarm
            ic_alarm[mi, t] = det.observe(ic[t - 1]).alarm
    return ic_alarm, ooc_alarm


@dataclass
class F1Experiment:
    """Raw per-batch alarm indicators plus the aggregated F1 curves.

    ``ic_alarm[b, m, t]`` and ``ooc_alarm[b, m, s, t]`` hold the decision of
    method ``m`` at time ``t`` (index 0 and 1 unused).
    """

    methods: list[Method]
    scenarios: list[str]
    horizon: int
    ic_alarm: np.ndarray
    ooc_alarm: np.ndarray
    rf: RfThreshold | None = None
    seed: int = 0

    @property
    def batches(self) -> int:
        return self.ic_alarm.shape[0]

    @property
    def times(self) -> range:
        return range(2, self.horizon + 1)

    def rates(self, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(fp[m, t], tp[m, s, t]) as (weighted) batch averages."""
        if weights is None:
            return self.ic_alarm.mean(axis=0), self.ooc_alarm.mean(axis=0)
        w = weights / weights.sum()
        return np.tensordot(w, self.ic_alarm, axes=1), np.tensordot(w, self.ooc_alarm, axes=1)

    def f1(self, weights: np.ndarray | None = None) -> np.ndarray:
        """F1[m, s, t] = 2 tp / (1 + tp + fp), i.e. fn = 1 - tp."""
        fp, tp = self.rates(weights)
        fp = fp[:, None, :]
        denom = 2.0 * tp + fp + (1.0 - tp)
        return np.where(denom > 0, 2.0 * tp / np.where(denom > 0, denom, 1.0), 0.0)

    def method_index(self, name: str, prior: str = "", alpha0: float | None = None) -> int:
        for i, m in enumerate(self.methods):
            if m.name == name and (name == "RF" or (m.prior == prior and m.alpha0 == alpha0)):
                return i
        raise KeyError((name, prior, alpha0))

    def rows(self) -> list[dict]:
        fp, tp = self.rates()
        f1 = self.f1()
        out = []
        for mi, m in enumerate(self.methods):
            for si, s in enumerate(self.scenarios):
                for t in self.times:
                    out.append({
                        "method": m.name,
                        "prior": m.prior,
                        "alpha0": "" if m.alpha0 is None else m.alpha0,
                        "scenario": s,
                        "t": t,
                        "tp": float(tp[mi, si, t]),
                        "fp": float(fp[mi, t]),
                        "fn": float(1.0 - tp[mi, si, t]),
                        "f1": float(f1[mi, si, t]),
                    })
        return out


def run_f1_experiment(
    grid: list[Method] | None = None,
    scenarios: list[str] | tuple[str, ...] = ANOMALY_KINDS,
    batches: int = 1000,
    seed: int = 0,
    horizon: int = 30,
    rf: RfThreshold | None = None,
    rf_samples: int = 1_000_000,
    include_rf: bool = True,
    workers: int = 1,
) -> F1Experiment:
    if batches < 1:
        raise ValueError("need at least one batch")
    methods = list(default_grid() if grid is None else grid)
    if include_rf:
        if rf is None:
            ic = ScenarioSpec.make("ic", horizon=horizon).ic_params
            rf = calibrate_rf_threshold(ic, 0.01, rf_samples, RngStream(seed, (2**32,)))
        methods.append(Method("RF", "", None))
    scenarios = list(scenarios)
    jobs = [(b, seed, methods, scenarios, horizon, rf) for b in range(batches)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_batch, jobs, chunksize=max(1, batches // (8 * workers))))
    else:
        results = [_run_batch(j) for j in jobs]
    ic_alarm = np.stack([r[0] for r in results])
    ooc_alarm = np.stack([r[1] for r in results])
    return F1Experiment(methods, scenarios, horizon, ic_alarm, ooc_alarm, rf, seed)


def write_f1_csv(exp: F1Experiment, fh) -> None:
    fh.write(f"# rfsmon f1-table v{F1_CSV_VERSION}\n")
    writer = csv.DictWriter(fh, fieldnames=F1_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in exp.rows():
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_f1_csv(fh) -> list[dict]:
    header = fh.readline()
    if not header.startswith("# rfsmon f1-table v"):
        raise ValueError("missing f1-table version header")
    version = header.strip().rsplit("v", 1)[1]
    if version.split(".")[0] != F1_CSV_VERSION.split(".")[0]:
        raise ValueError(f"unsupported f1-table major version {version}")
    rows = []
    for row in csv.DictReader(fh):
        row["t"] = int(row["t"])
        for k in ("tp", "fp", "fn", "f1"):
            row[k] = float(row[k])
        row["alpha0"] = float(row["alpha0"]) if row["alpha0"] else None
        rows.append(row)
    return rows


@dataclass
class OrderingCheck:
    name: str
    passed: bool
    detail: str
    violations: list = field(default_factory=list)


def fig3_orderings(exp: F1Experiment, n_boot: int = 1000, boot_seed: int = 0, level: float = 0.95) -> list[OrderingCheck]:
    """The qualitative comparisons between PC variants and RF.

    (a) PC(J, a0=1) >= RF at every t >= 4, every scenario;
    (b) RF F1 < 0.1 at every t under the rate drop to 2 (s3);
    (c) informative prior beats Jeffreys at t = 2 (same a0), every scenario;
    (d) a0 = 1 is never significantly worse than a0 in {0.8, 0.9}: the
        simultaneous upper bound of F1(a0=1) - F1(a0') from a paired
        max-statistic bootstrap over all (prior, scenario, t) cells is >= 0.
    """
    f1 = exp.f1()
    times = list(exp.times)
    out = []

    rf = exp.method_index("RF")
    pcj = exp.method_index("PC", "J", 1.0)
    viol = [(s, t, f1[pcj, si, t], f1[rf, si, t])
            for si, s in enumerate(exp.scenarios) for t in times if t >= 4 and f1[pcj, si, t] < f1[rf, si, t]]
    out.append(OrderingCheck("a: PC(J,1) >= RF for t>=4", not viol, f"{len(viol)} violations", viol))

    if "s3" in exp.scenarios:
        s3 = exp.scenarios.index("s3")
        worst = max(f1[rf, s3, t] for t in times)
        viol = [(t, f1[rf, s3, t]) for t in times if f1[rf, s3, t] >= 0.1]
        out.append(OrderingCheck("b: RF F1 < 0.1 in s3", not viol, f"max F1 = {worst:.4f}", viol))

    viol = []
    for a0 in (0.8, 0.9, 1.0):
        inf, jef = exp.method_index("PC", "inf", a0), exp.method_index("PC", "J", a0)
        for si, s in enumerate(exp.scenarios):
            if not f1[inf, si, 2] > f1[jef, si, 2]:
                viol.append((a0, s, f1[inf, si, 2], f1[jef, si, 2]))
    out.append(OrderingCheck("c: PC(inf) F1(2) > PC(J) F1(2)", not viol, f"{len(viol)} violations", viol))

    pairs = []
    for prior in ("J", "inf"):
        one = exp.method_index("PC", prior, 1.0)
        for a0 in (0.8, 0.9):
            pairs.append((prior, a0, one, exp.method_index("PC", prior, a0)))
    t_idx = np.array(times)

    def diffs(f):
        return np.stack([f[one][:, t_idx] - f[other][:, t_idx] for _, _, one, other in pairs])

    observed = diffs(f1)
    rng = np.random.default_rng(boot_seed)
    boot = np.empty((n_boot,) + observed.shape)
    for i in range(n_boot):
        w = rng.multinomial(exp.batches, np.full(exp.batches, 1.0 / exp.batches)).astype(float)
        boot[i] = diffs(exp.f1(w))
    se = boot.std(axis=0, ddof=1)
    se = np.where(se > 0, se, np.inf)
    # one-sided simultaneous band: how far below the truth can the estimate sit
    excess = np.max(((observed - boot) / se).reshape(n_boot, -1), axis=1)
    crit = float(np.quantile(excess, level))
    upper = observed + crit * np.where(np.isfinite(se), se, 0.0)
    viol = []
    for pi, (prior, a0, _, _) in enumerate(pairs):
        for si, s in enumerate(exp.scenarios):
            for ti, t in enumerate(times):
                if upper[pi, si, ti] < 0:
                    viol.append((prior, a0, s, t, float(observed[pi, si, ti]), float(upper[pi, si, ti])))
    worst = float(observed.min())
    out.append(OrderingCheck(
        "d: a0=1 weakly dominates a0 in {0.8, 0.9}",
        not viol,
        f"critical value {crit:.3f}, smallest observed difference {worst:+.4f}",
        viol,
    ))
    return out


def fig1_tracking(ns: np.ndarray, alpha0: float, prior: PriorSpec | None = None) -> np.ndarray:
    """Posterior rate mean after each observation of a cardinality sequence."""
    prior = prior or PriorSpec.jeffreys(2)
    post = GammaPosterior(prior.c0, prior.d0)
    out = np.empty(len(ns))
    for i, n in enumerate(ns):
        post = gamma_update(post, int(n), alpha0)
        out[i] = posterior_rate_mean(post)
    return out


def fig1_data(seed: int = 0, alpha0s=(0.8, 0.9, 1.0), ramp_steps: int | None = 3) -> list[dict]:
    spec = ScenarioSpec.make("fig1", ramp_steps=ramp_steps)
    batch = gen_batch(spec, RngStream(seed))
    ns = np.array([X.n for X in batch])
    rates = spec.rates()
    means = {a0: fig1_tracking(ns, a0) for a0 in alpha0s}
    return [
        {"t": t + 1, "n": int(ns[t]), "rate": float(rates[t]), **{f"mean_a0_{a0:g}": float(means[a0][t]) for a0 in alpha0s}}
        for t in range(len(ns))
    ]


def write_fig1_csv(rows: list[dict], fh) -> None:
    fh.write("# rfsmon fig1 v1.0\n")
    writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def fig1_csv_text(seed: int = 0, ramp_steps: int | None = 3) -> str:
    buf = io.StringIO()
    write_fig1_csv(fig1_data(seed, ramp_steps=ramp_steps), buf)
    return buf.getvalue()
