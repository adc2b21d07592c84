"""Stability certificates for stationary points of one-constraint quadratic programs."""
from .certificates import CATALOG, StabilityReport, stability_verdict
from .model import DerivativeSnapshot, QpInstance, qp_snapshot
from .oracle import distance_to_stationary_set, stationary_set
from .report import analyze
from .stationarity import Case, check_stationarity, classify_case
from .tolerances import TolerancePolicy
from .verify import SamplingConfig, verify_lipschitz_like, verify_robinson

__version__ = "0.1.0"

__all__ = [
    "CATALOG", "Case", "DerivativeSnapshot", "QpInstance", "SamplingConfig",
    "StabilityReport", "TolerancePolicy", "analyze", "check_stationarity",
    "classify_case", "distance_to_stationary_set", "qp_snapshot", "stationary_set",
    "stability_verdict", "verify_lipschitz_like", "verify_robinson",
]
