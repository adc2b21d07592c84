"""Stationarity, MFCQ, the multiplier and the interior/boundary case split."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cones import distance_to_ray
from .errors import InfeasiblePointError, MFCQError, NotStationaryError
from .model import DerivativeSnapshot
from .tolerances import TolerancePolicy, resolve


class Case(str, Enum):
    INTERIOR = "Interior"
    BOUNDARY_POSITIVE = "BoundaryPositive"
    BOUNDARY_ZERO = "BoundaryZero"


@dataclass(frozen=True)
class CaseInfo:
    case_tag: Case
    lam: float
    activity_residual: float

    @property
    def is_boundary(self) -> bool:
        return self.case_tag is not Case.INTERIOR


@dataclass(frozen=True)
class StationarityCheck:
    residual: float
    is_stationary: bool
    mfcq_ok: bool
    case: CaseInfo | None


def _activity_tol(s: DerivativeSnapshot, policy: TolerancePolicy, alpha: float | None) -> float:
    return policy.activity_tol(0.0 if alpha is None else alpha)


def check_mfcq(s: DerivativeSnapshot, policy: TolerancePolicy | None = None,
               alpha: float | None = None) -> bool:
    policy = resolve(policy)
    if s.F_value < -_activity_tol(s, policy, alpha):
        return True
    return bool(np.linalg.norm(s.grad_x_F) > policy.tol)


def stationarity_residual(s: DerivativeSnapshot, policy: TolerancePolicy | None = None,
                          alpha: float | None = None) -> float:
    """Distance from 0 to ``grad f0 + N_C(x_bar)``; +inf for infeasible points."""
    policy = resolve(policy)
    if not check_mfcq(s, policy, alpha):
        raise MFCQError("active constraint with zero gradient")
    act = _activity_tol(s, policy, alpha)
    if s.F_value < -act:
        return float(np.linalg.norm(s.grad_f0))
    if s.F_value <= act:
        return distance_to_ray(-s.grad_f0, s.grad_x_F)
    return math.inf


def _stationarity_tol(s: DerivativeSnapshot, policy: TolerancePolicy) -> float:
    return policy.tol * (1.0 + float(np.linalg.norm(s.grad_f0)))


def lagrange_multiplier(s: DerivativeSnapshot, policy: TolerancePolicy | None = None,
                        alpha: float | None = None) -> float:
    """Least-squares multiplier of ``grad f0 + lam grad F = 0`` at an active point."""
    policy = resolve(policy)
    act = _activity_tol(s, policy, alpha)
    if abs(s.F_value) > act:
        raise NotStationaryError(f"constraint is not active (F = {s.F_value:.3g})")
    u = s.grad_x_F
    uu = float(u @ u)
    if math.sqrt(uu) <= policy.tol:
        raise MFCQError("active constraint with zero gradient")
    lam = -float(s.grad_f0 @ u) / uu
    gap = float(np.linalg.norm(s.grad_f0 + lam * u))
    if gap > _stationarity_tol(s, policy):
        raise NotStationaryError(
            f"gradient equation inconsistent (residual {gap:.3g})", residual=gap
        )
    if lam < -policy.tol:
        raise NotStationaryError(f"negative multiplier {lam:.6g}", residual=gap)
    if abs(lam) <= policy.tol:
        lam = 0.0
    return lam


def classify_case(s: DerivativeSnapshot, policy: TolerancePolicy | None = None,
                  alpha: float | None = None) -> CaseInfo:
    policy = resolve(policy)
    act = _activity_tol(s, policy, alpha)
    if s.F_value > act:
        raise InfeasiblePointError(f"point violates the constraint (F = {s.F_value:.3g})")
    if s.F_value < -act:
        res = float(np.linalg.norm(s.grad_f0))
        if res > _stationarity_tol(s, policy):
            raise NotStationaryError(f"interior point with nonzero gradient ({res:.3g})", res)
        return CaseInfo(Case.INTERIOR, 0.0, abs(s.F_value))
    lam = lagrange_multiplier(s, policy, alpha)
    tag = Case.BOUNDARY_POSITIVE if lam > policy.tol else Case.BOUNDARY_ZERO
    return CaseInfo(tag, lam, abs(s.F_value))


def check_stationarity(s: DerivativeSnapshot, policy: TolerancePolicy | None = None,
                       alpha: float | None = None) -> StationarityCheck:
    """Run the full chain; never raises for non-stationary or MFCQ-violating points."""
    policy = resolve(policy)
    mfcq = check_mfcq(s, policy, alpha)
    if not mfcq:
        return StationarityCheck(math.nan, False, False, None)
    residual = stationarity_residual(s, policy, alpha)
    stationary = residual <= _stationarity_tol(s, policy)
    case = None
    if stationary:
        try:
            case = classify_case(s, policy, alpha)
        except NotStationaryError:
            stationary = False
    return StationarityCheck(residual, stationary, True, case)
