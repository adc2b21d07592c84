"""Dense phase-one simplex for small feasibility problems ``G y >= h`` (y free).

Bland's rule throughout, so degenerate cones (most right-hand sides are 0)
cannot cycle. Exceeding the iteration cap is reported, never guessed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INDETERMINATE = "indeterminate"


@dataclass
class PhaseOneResult:
    status: str
    y: np.ndarray | None
    infeasibility: float
    iterations: int


def phase_one(G, h, *, feas_tol: float = 1e-9, pivot_tol: float = 1e-12,
              max_iter: int | None = None) -> PhaseOneResult:
    """Decide feasibility of ``G y >= h`` with ``h >= 0``.

    Standard form: ``G p - G q - s + a = h`` with ``p, q, s, a >= 0``;
    minimize ``sum(a)`` starting from the all-artificial basis.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    m, k = G.shape
    if m == 0:
        return PhaseOneResult(FEASIBLE, np.zeros(k), 0.0, 0)
    if np.any(h < 0):
        raise ValueError("right-hand side must be nonnegative")
    nvars = 2 * k + m
    ncols = nvars + m
    if max_iter is None:
        max_iter = 10 * (ncols + m)

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :k] = G
    T[:m, k:2 * k] = -G
    T[:m, 2 * k:nvars] = -np.eye(m)
    T[:m, nvars:ncols] = np.eye(m)
    T[:m, -1] = h
    # reduced costs of the phase-one objective for the artificial basis
    T[m, :nvars] = -T[:m, :nvars].sum(axis=0)
    T[m, -1] = -h.sum()
    basis = list(range(nvars, ncols))

    it = 0
    while True:
        costs = T[m, :ncols]
        entering = next((j for j in range(ncols) if costs[j] < -pivot_tol), None)
        if entering is None:
            break
        if it >= max_iter:
            return PhaseOneResult(INDETERMINATE, None, float(-T[m, -1]), it)
        col = T[:m, entering]
        rows = np.flatnonzero(col > pivot_tol)
        if rows.size == 0:
            # phase-one objective is bounded below by 0; only roundoff lands here
            return PhaseOneResult(INDETERMINATE, None, float(-T[m, -1]), it)
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + pivot_tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda r: basis[r])
        T[leave] /= T[leave, entering]
        for r in range(m + 1):
            if r != leave and T[r, entering] != 0.0:
                T[r] -= T[r, entering] * T[leave]
        basis[leave] = entering
        it += 1

    infeas = float(-T[m, -1])
    if infeas > feas_tol:
        return PhaseOneResult(INFEASIBLE, None, infeas, it)
    x = np.zeros(ncols)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    y = x[:k] - x[k:2 * k]
    return PhaseOneResult(FEASIBLE, y, infeas, it)
