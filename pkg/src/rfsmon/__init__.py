"""Online out-of-control detection for sequences of Poisson point patterns."""

from rfsmon.checks import CheckResult, NbPredictive, cardinality_pvalue, feature_pvalue, fisher_combine
from rfsmon.detector import Detector, DetectorConfig
from rfsmon.posterior import GammaPosterior, NiwPosterior, PriorSpec, init_prior
from rfsmon.rfs_model import GaussParams, PointPattern, PoissonRfsParams

__all__ = [
    "CheckResult",
    "Detector",
    "DetectorConfig",
    "GammaPosterior",
    "GaussParams",
    "NbPredictive",
    "NiwPosterior",
    "PointPattern",
    "PoissonRfsParams",
    "PriorSpec",
    "cardinality_pvalue",
    "feature_pvalue",
    "fisher_combine",
    "init_prior",
]

__version__ = "0.1.0"
