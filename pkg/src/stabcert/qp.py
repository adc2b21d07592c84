"""Closed-form stability tests for QP instances and strong-regularity criteria.

Nonsingularity is always decided by the smallest singular value against the
rank threshold; determinants are returned only for human comparison.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import cones
from .cones import ConeSpec, cone_implication, is_nonsingular, kernel_basis
from .errors import IndeterminateError, WrongCaseError
from .model import DerivativeSnapshot, QpInstance, evaluate
from .tolerances import TolerancePolicy, resolve


@dataclass(frozen=True)
class BorderedMatrix:
    core: np.ndarray
    border: np.ndarray

    @property
    def n(self) -> int:
        return self.border.size

    @property
    def assembled(self) -> np.ndarray:
        n = self.n
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = self.core
        M[:n, n] = self.border
        M[n, :n] = self.border
        return M

    @property
    def negated(self) -> np.ndarray:
        """Variant with ``-border'`` as the last row (Jacobian of the KKT map)."""
        M = self.assembled
        M[-1, :-1] *= -1.0
        return M

    def det(self) -> float:
        return float(np.linalg.det(self.assembled))

    def nonsingular(self, policy: TolerancePolicy | None = None) -> bool:
        return is_nonsingular(self.assembled, policy)


def bordered(core, border) -> BorderedMatrix:
    core = np.atleast_2d(np.asarray(core, dtype=float))
    border = np.asarray(border, dtype=float).ravel()
    return BorderedMatrix(core, border)


def _active_border(instance: QpInstance, x_bar, policy: TolerancePolicy) -> np.ndarray:
    _, F, _, u = evaluate(instance, x_bar)
    if abs(F) > policy.activity_tol(instance.alpha):
        raise WrongCaseError(f"constraint is not active at x_bar (F = {F:.3g})")
    return u


def _zero_multiplier_border(instance: QpInstance, x_bar, policy: TolerancePolicy) -> np.ndarray:
    u = _active_border(instance, x_bar, policy)
    g = instance.D @ np.asarray(x_bar, dtype=float) + instance.c
    if np.linalg.norm(g) > policy.tol * (1.0 + np.linalg.norm(instance.c)):
        raise WrongCaseError("multiplier is not zero at x_bar")
    return u


# -- Lipschitz-likeness / Robinson stability tests ---------------------------

def interior_test(D, policy: TolerancePolicy | None = None) -> tuple[float, bool]:
    D = np.atleast_2d(np.asarray(D, dtype=float))
    return float(np.linalg.det(D)), is_nonsingular(D, policy)


def bordered_test_positive_lambda(instance: QpInstance, x_bar, lam: float,
                                  policy: TolerancePolicy | None = None) -> tuple[float, bool]:
    """Determinant and verdict for ``[[D + lam A, Ax + b], [(Ax + b)', 0]]``."""
    policy = resolve(policy)
    if lam <= 0:
        raise WrongCaseError(f"multiplier must be positive, got {lam}")
    u = _active_border(instance, x_bar, policy)
    B = bordered(instance.D + lam * instance.A, u)
    return B.det(), B.nonsingular(policy)


class ZeroSufficient(NamedTuple):
    bordered_nonsingular: bool
    no_ascent_direction: bool
    kernel_orthogonal: bool
    bordered_det: float
    ascent_witness: np.ndarray | None

    @property
    def all_hold(self) -> bool:
        return self.bordered_nonsingular and self.no_ascent_direction and self.kernel_orthogonal


def zero_lambda_conditions(D, u, policy: TolerancePolicy | None = None) -> ZeroSufficient:
    """Sufficient triple for a zero multiplier, stated on ``D`` and border ``u``.

    (a) the bordered matrix is nonsingular; (b) ``D v + g u = 0, g >= 0``
    forces ``u'v <= 0``; (c) ``ker D`` is orthogonal to ``u``.
    """
    policy = resolve(policy)
    D = np.atleast_2d(np.asarray(D, dtype=float))
    u = np.asarray(u, dtype=float).ravel()
    n = u.size
    B = bordered(D, u)
    E = np.hstack([D, u[:, None]])
    gamma = np.zeros(n + 1)
    gamma[n] = 1.0
    ascent = ConeSpec(E, [gamma], [np.append(u, 0.0)])
    verdict = cone_implication(ascent, np.eye(n + 1), policy)
    if verdict.holds is None:
        raise IndeterminateError("ascent-direction check hit the iteration cap")
    kernel_ok = cones.subspace_contained_in_kernel(kernel_basis(D, policy), u[None, :], policy)
    return ZeroSufficient(B.nonsingular(policy), bool(verdict.holds), kernel_ok, B.det(),
                          verdict.witness)


def zero_lambda_necessary_condition(D, u, policy: TolerancePolicy | None = None) -> cones.ImplicationVerdict:
    """``{D v + g u = 0, u'v >= 0, g >= 0}`` must be ``{0}``."""
    policy = resolve(policy)
    D = np.atleast_2d(np.asarray(D, dtype=float))
    u = np.asarray(u, dtype=float).ravel()
    n = u.size
    gamma = np.zeros(n + 1)
    gamma[n] = 1.0
    premise = ConeSpec(np.hstack([D, u[:, None]]), [np.append(u, 0.0), gamma], [])
    return cone_implication(premise, np.eye(n + 1), policy)


def zero_lambda_sufficient(instance: QpInstance, x_bar, policy: TolerancePolicy | None = None) -> ZeroSufficient:
    policy = resolve(policy)
    u = _zero_multiplier_border(instance, x_bar, policy)
    return zero_lambda_conditions(instance.D, u, policy)


def zero_lambda_necessary(instance: QpInstance, x_bar, policy: TolerancePolicy | None = None) -> cones.ImplicationVerdict:
    policy = resolve(policy)
    u = _zero_multiplier_border(instance, x_bar, policy)
    return zero_lambda_necessary_condition(instance.D, u, policy)


def trs_inverse_form(D, x_bar) -> float:
    """``x' D^{-1} x`` for a nonsingular ``D``."""
    return float(np.asarray(x_bar) @ np.linalg.solve(D, x_bar))


# -- strong regularity -------------------------------------------------------

def lagrangian_hessian(s: DerivativeSnapshot, lam: float) -> np.ndarray:
    return s.hess_xx_f0 + lam * s.hess_xx_F


def strong_regularity_positive(s: DerivativeSnapshot, lam: float,
                               policy: TolerancePolicy | None = None) -> bool:
    """Nonsingularity of the symmetric KKT matrix at a positive multiplier."""
    policy = resolve(policy)
    if lam <= 0:
        raise WrongCaseError(f"multiplier must be positive, got {lam}")
    return bordered(lagrangian_hessian(s, lam), s.grad_x_F).nonsingular(policy)


def strong_regularity_zero(s: DerivativeSnapshot, policy: TolerancePolicy | None = None) -> bool:
    """Hessian nonsingular and ``u' H^{-1} u > 0`` for a zero multiplier."""
    policy = resolve(policy)
    H = s.hess_xx_f0
    if not is_nonsingular(H, policy):
        return False
    u = s.grad_x_F
    q = float(u @ np.linalg.solve(H, u))
    smin = np.linalg.svd(H, compute_uv=False)[-1]
    return q > policy.tol * float(u @ u) / smin


def critical_face_check(core, border, lambda_case: str, v0_negative: bool = False,
                        policy: TolerancePolicy | None = None) -> bool:
    """Critical face condition for the linearized KKT system on R^n x R_+.

    ``lambda_case="positive"``: the critical cone is the whole space, so the
    check is nonsingularity of the KKT Jacobian. ``lambda_case="zero"``
    with ``v0_negative`` (inactive multiplier direction): cone R^n x {0},
    so the core must be nonsingular. Otherwise the cone is R^n x R_+ with
    faces R^n x {0} and R^n x R_+, giving three face pairs.
    """
    policy = resolve(policy)
    B = bordered(core, border)
    jac = B.negated
    if lambda_case == "positive":
        return is_nonsingular(jac, policy)
    if lambda_case != "zero":
        raise ValueError(f"lambda_case must be 'positive' or 'zero', got {lambda_case!r}")
    if not is_nonsingular(B.core, policy):
        return False
    if v0_negative:
        return True
    if not is_nonsingular(jac, policy):
        return False
    n = B.n
    gamma = np.zeros(n + 1)
    gamma[n] = 1.0
    premise = ConeSpec(np.hstack([B.core, -B.border[:, None]]),
                       [np.append(-B.border, 0.0), gamma], [])
    verdict = cone_implication(premise, np.eye(n + 1), policy)
    if verdict.holds is None:
        raise IndeterminateError("critical face implication hit the iteration cap")
    return bool(verdict.holds)

