"""k-core thresholds, peeling algorithms and Monte Carlo checks for random graphs."""

from kcore_lab.errors import (
    DomainError,
    KCoreError,
    NoSupercriticalRoot,
    ParityError,
    ParseError,
    RangeError,
    RejectionError,
    SamplingError,
    SizeError,
    StructureError,
)
from kcore_lab.theory import (
    CorePrediction,
    DegreeDistribution,
    lambda_crit,
    mu_k,
    poisson_tail,
    predict_core,
    root_pair,
)

__version__ = "0.1.0"

__all__ = [
    "CorePrediction",
    "DegreeDistribution",
    "DomainError",
    "KCoreError",
    "NoSupercriticalRoot",
    "ParityError",
    "ParseError",
    "RangeError",
    "RejectionError",
    "SamplingError",
    "SizeError",
    "StructureError",
    "lambda_crit",
    "mu_k",
    "poisson_tail",
    "predict_core",
    "root_pair",
]
