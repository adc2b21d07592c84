"""The single tolerance policy threaded through every verdict."""
from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

ENV_VAR = "STABCERT_TOL"
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TolerancePolicy:
    """Numerical knobs.

    ``tol`` drives activity, multiplier-sign and stationarity decisions.
    ``rank_rtol`` overrides the default rank threshold
    ``max(rows, cols) * eps * sigma_max`` when set.
    ``feas_tol`` is the phase-one objective threshold of the LP kernel.
    """

    tol: float = 1e-9
    rank_rtol: float | None = None
    feas_tol: float = 1e-9
    symmetry_rtol: float = 1e-12

    def rank_threshold(self, shape, sigma_max: float) -> float:
        if self.rank_rtol is not None:
            return self.rank_rtol * sigma_max
        return max(shape) * EPS * sigma_max

    def activity_tol(self, alpha: float = 0.0) -> float:
        return self.tol * (1.0 + abs(alpha))

    def with_tol(self, tol: float) -> "TolerancePolicy":
        return replace(self, tol=float(tol))


def default_policy() -> TolerancePolicy:
    """Default policy, honouring the ``STABCERT_TOL`` environment variable."""
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            return TolerancePolicy(tol=float(raw))
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be a float, got {raw!r}") from None
    return TolerancePolicy()


def resolve(policy: TolerancePolicy | None) -> TolerancePolicy:
    return default_policy() if policy is None else policy
