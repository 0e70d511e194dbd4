"""Online detector: one instance monitors one stream of point patterns."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from rfsmon.checks import SCALE_VARIANTS, CheckResult, NbPredictive, SpatialPredictive, cardinality_pvalue, fisher_combine
from rfsmon.posterior import GammaPosterior, NiwPosterior, PriorSpec, gamma_update, init_prior, niw_update
from rfsmon.rfs_model import PointPattern

UPDATE_POLICIES = ("skip_on_alarm", "always_update")
SNAPSHOT_FORMAT = "rfsmon-detector"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class DetectorConfig:
    alpha0: float = 1.0
    alpha: float = 0.01
    prior: PriorSpec | None = None
    dim: int = 2
    scale_variant: str = "derived"
    update_policy: str = "skip_on_alarm"
    history_len: int = 128

    def __post_init__(self):
        if not 0.0 <= self.alpha0 <= 1.0:
            raise ValueError(f"alpha0 must lie in [0, 1], got {self.alpha0}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.prior is None:
            object.__setattr__(self, "prior", PriorSpec.jeffreys(self.dim))
        elif self.prior.dim != self.dim:
            raise ValueError(f"prior dimension {self.prior.dim} != dim {self.dim}")
        if self.scale_variant not in SCALE_VARIANTS:
            raise ValueError(f"unknown scale variant {self.scale_variant!r}")
        if self.update_policy not in UPDATE_POLICIES:
            raise ValueError(f"unknown update policy {self.update_policy!r}")
        if self.history_len < 0:
            raise ValueError("history_len must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "alpha": self.alpha,
            "prior": self.prior.to_dict(),
            "dim": self.dim,
            "scale_variant": self.scale_variant,
            "update_policy": self.update_policy,
            "history_len": self.history_len,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectorConfig":
        return cls(
            alpha0=float(doc["alpha0"]),
            alpha=float(doc["alpha"]),
            prior=PriorSpec.from_dict(doc["prior"]),
            dim=int(doc["dim"]),
            scale_variant=doc["scale_variant"],
            update_policy=doc["update_policy"],
            history_len=int(doc.get("history_len", 128)),
        )


class Detector:
    """Sequential predictive-check detector.

    The first observation only trains the posterior. Every later observation
    is checked against the posterior predictive built from everything before
    it, then absorbed according to ``config.update_policy``.
    """

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self.gamma, self.niw = init_prior(self.config.prior)
        self.t = 0
        self.history: deque[CheckResult] = deque(maxlen=self.config.history_len)
        self._predictive = None

    def _validate(self, X: PointPattern) -> None:
        if X.t != self.t + 1:
            raise ValueError(f"expected time index {self.t + 1}, got {X.t}")
        if X.dim is not None and X.dim != self.config.dim:
            raise ValueError(f"pattern dimension {X.dim} does not match detector dimension {self.config.dim}")

    def predictive(self) -> tuple[NbPredictive | None, SpatialPredictive | None]:
        """Predictive distributions for the next observation (cached until the next update)."""
        if self._predictive is None:
            nb = NbPredictive.from_gamma(self.gamma) if self.gamma.ready else None
            spatial = SpatialPredictive(self.niw) if self.niw.ready else None
            self._predictive = (nb, spatial)
        return self._predictive

    def check(self, X: PointPattern) -> CheckResult:
        """Test ``X`` against the current posterior without updating it."""
        self._validate(X)
        if self.t == 0:
            return CheckResult(t=X.t, n=X.n)
        nb, spatial = self.predictive()
        if nb is None:
            return CheckResult(t=X.t, n=X.n)
        pr_n = cardinality_pvalue(X.n, nb)
        pr_x = None
        if spatial is not None and X.n > 0:
            pr_x = spatial.pvalue(X.points.mean(axis=0), X.n, self.config.scale_variant)
        return fisher_combine(pr_n, pr_x, self.config.alpha, t=X.t, n=X.n)

    def update(self, X: PointPattern) -> None:
        a0 = self.config.alpha0
        self.gamma = gamma_update(self.gamma, X.n, a0)
        self.niw = niw_update(self.niw, X, a0)
        self._predictive = None

    def observe(self, X: PointPattern) -> CheckResult:
        result = self.check(X)
        if not (result.alarm and self.config.update_policy == "skip_on_alarm"):
            self.update(X)
        self.t = X.t
        self.history.append(result)
        return result

    def snapshot(self) -> dict:
        niw = self.niw
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "config": self.config.to_dict(),
            "t": self.t,
            "dim": self.config.dim,
            "alpha0": self.config.alpha0,
            "c": self.gamma.c,
            "d": self.gamma.d,
            "m": niw.m.tolist(),
            "l": niw.l,
            "nu": niw.nu,
            "psi": niw.psi.tolist(),
            "W": niw.W,
            "S": niw.S.tolist(),
            "Q": niw.Q.tolist(),
            "a_pow": niw.a_pow,
        }

    def dumps(self) -> str:
        return json.dumps(self.snapshot())

    @classmethod
    def restore(cls, doc: dict | str) -> "Detector":
        try:
            if isinstance(doc, str):
                doc = json.loads(doc)
            if doc.get("format") != SNAPSHOT_FORMAT:
                raise SnapshotError(f"not a detector snapshot (format={doc.get('format')!r})")
            if doc.get("version") != SNAPSHOT_VERSION:
                raise SnapshotError(f"unsupported snapshot version {doc.get('version')!r}")
            config = DetectorConfig.from_dict(doc["config"])
            det = cls(config)
            det.t = int(doc["t"])
            det.gamma = GammaPosterior(float(doc["c"]), float(doc["d"]))
            det.niw = NiwPosterior(
                config.prior,
                W=float(doc["W"]),
                S=np.asarray(doc["S"], dtype=float).reshape(config.dim),
                Q=np.asarray(doc["Q"], dtype=float).reshape(config.dim, config.dim),
                a_pow=float(doc["a_pow"]),
            )
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise SnapshotError(f"malformed detector snapshot: {exc}") from exc
        if det.t < 0 or int(doc["dim"]) != config.dim or float(doc["alpha0"]) != config.alpha0:
            raise SnapshotError("snapshot header disagrees with its config")
        _check_same("l", det.niw.l, doc["l"])
        _check_same("nu", det.niw.nu, doc["nu"])
        _check_same("m", det.niw.m, doc["m"])
        _check_same("psi", det.niw.psi, doc["psi"])
        return det


def _check_same(name: str, derived, stored) -> None:
    derived = np.asarray(derived, dtype=float)
    try:
        stored = np.asarray(stored, dtype=float).reshape(derived.shape)
    except (TypeError, ValueError) as exc:
        raise SnapshotError(f"snapshot field {name!r} is malformed") from exc
    if not np.array_equal(derived, stored, equal_nan=True):
        raise SnapshotError(f"snapshot field {name!r} is inconsistent with its sufficient statistics")
