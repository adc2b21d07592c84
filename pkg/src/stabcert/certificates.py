"""Per-case kernel and cone conditions on a derivative snapshot.

Each condition is reported under a stable identifier listed in
:data:`CATALOG`; the identifiers are what the JSON report carries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qp
from .cones import (
    ConeSpec, ImplicationVerdict, SubspaceBasis, cone_implication, intersect_with_product_space,
    kernel_basis, subspace_contained_in_kernel,
)
from .errors import WrongCaseError
from .model import DerivativeSnapshot
from .stationarity import Case, CaseInfo
from .tolerances import TolerancePolicy, resolve

HOLDS, FAILS, INDETERMINATE = "holds", "fails", "indeterminate"
YES, NO, UNKNOWN = "yes", "no", "unknown"

CATALOG = {
    # inactive constraint
    "interior.hessian_kernel_trivial":
        "ker Hxx f0 = {0}; sufficient for Robinson stability",
    "interior.kernels_meet_trivially":
        "ker Hxx f0 ∩ ker Hwx f0 = {0}",
    "interior.hessian_kernel_in_mixed_kernel":
        "ker Hxx f0 ⊂ ker Hwx f0",
    # active constraint, positive multiplier
    "positive.tangent_kernel_trivial":
        "ker A1 ∩ (ker grad_x F × R) = {0}; sufficient for Robinson stability",
    "positive.tangent_kernel_meets_A2_trivially":
        "ker A1 ∩ ker A2 ∩ (ker grad_x F × R) = {0}",
    "positive.tangent_kernel_in_A2_kernel":
        "ker A1 ∩ (ker grad_x F × R) ⊂ ker A2",
    # active constraint, zero multiplier
    "zero.kernels_meet_trivially":
        "ker A1' ∩ ker A2' = {0}",
    "zero.tangent_kernel_in_A2p_kernel":
        "ker A1' ∩ (ker grad_x F × R) ⊂ ker A2'",
    "zero.ascent_cone_in_A2p_kernel":
        "ker A1' ∩ {grad_x F'v > 0, g >= 0} ⊂ ker A2'",
    "zero.descent_cone_in_mixed_kernel":
        "ker Hxx f0 ∩ {grad_x F'v < 0} ⊂ ker Hwx f0",
    "zero.necessary_cone_in_A2p_kernel":
        "ker A1' ∩ {grad_x F'v >= 0, g >= 0} ⊂ ker A2'; necessary for Lipschitz-likeness",
    # closed-form QP tests
    "qp.interior_det":
        "det D != 0; iff Lipschitz-like, sufficient for Robinson stability",
    "qp.bordered_det":
        "det [[D + lam A, Ax + b], [(Ax + b)', 0]] != 0; iff Lipschitz-like",
    "qp.zero_bordered_det":
        "det [[D, Ax + b], [(Ax + b)', 0]] != 0",
    "qp.zero_no_ascent_direction":
        "[Dv + g(Ax + b) = 0, g >= 0] implies (Ax + b)'v <= 0",
    "qp.zero_kernel_orthogonal":
        "Dv = 0 implies (Ax + b)'v = 0",
    "qp.zero_necessary":
        "[Dv + g(Ax + b) = 0, (Ax + b)'v >= 0, g >= 0] implies v = 0, g = 0",
    # strong regularity
    "strong.kkt_matrix_nonsingular":
        "symmetric KKT matrix [[Hxx L, grad_x F], [grad_x F', 0]] nonsingular",
    "strong.zero_multiplier_criterion":
        "Hxx f0 nonsingular and grad_x F' Hxx f0^{-1} grad_x F > 0",
    "strong.critical_face":
        "critical face condition of the linearized KKT system",
}

CODERIVATIVE_LABEL = "D*S(w|x)(0) = {0} (coderivative criterion)"


@dataclass(frozen=True)
class ConditionVerdict:
    condition_id: str
    status: str
    witness: np.ndarray | None = None
    vacuous: bool = False

    @property
    def holds(self) -> bool | None:
        return None if self.status == INDETERMINATE else self.status == HOLDS

    def to_dict(self) -> dict:
        return {
            "condition_id": self.condition_id,
            "verdict": self.status,
            "witness": None if self.witness is None else self.witness.tolist(),
            "vacuous": self.vacuous,
            "description": CATALOG[self.condition_id],
        }


@dataclass(frozen=True)
class CertificateMatrices:
    A1: np.ndarray
    A2: np.ndarray
    A1p: np.ndarray
    A2p: np.ndarray
    delta1: ConeSpec
    delta2: ConeSpec
    delta3: ConeSpec
    structural: bool = False
    """True when the w-blocks were not materialized and A2, A2', Hwx f0 are
    replaced by identities with the same (trivial) kernel."""


@dataclass(frozen=True)
class StabilityReport:
    case: CaseInfo
    conditions: tuple[ConditionVerdict, ...]
    lipschitz_like: str
    robinson_stable: str
    strong_regular: str
    localization: bool
    notes: tuple[str, ...] = field(default_factory=tuple)

    def condition(self, condition_id: str) -> ConditionVerdict:
        for c in self.conditions:
            if c.condition_id == condition_id:
                return c
        raise KeyError(condition_id)


def _verdict(cid: str, ok: bool, witness=None) -> ConditionVerdict:
    return ConditionVerdict(cid, HOLDS if ok else FAILS, None if ok else witness)


def _from_implication(cid: str, v: ImplicationVerdict) -> ConditionVerdict:
    return ConditionVerdict(cid, v.status, v.witness, v.vacuous)


def _first(B: SubspaceBasis):
    return None if B.is_trivial else B.vectors[:, 0].copy()


def _mixed_hessian(s: DerivativeSnapshot) -> np.ndarray:
    return s.hess_wx_f0 if s.has_w_blocks else np.eye(s.n)


def build_matrices(s: DerivativeSnapshot, case: CaseInfo) -> CertificateMatrices:
    n = s.n
    u = s.grad_x_F
    lam = case.lam
    A1 = np.hstack([s.hess_xx_f0 + lam * s.hess_xx_F, u[:, None]])
    A1p = np.hstack([s.hess_xx_f0, u[:, None]])
    if s.has_w_blocks:
        A2 = np.hstack([s.hess_wx_f0 + lam * s.hess_wx_F, s.grad_w_F[:, None]])
        A2p = np.hstack([s.hess_wx_f0, s.grad_w_F[:, None]])
        structural = False
    else:
        A2 = A2p = np.eye(n + 1)
        structural = True
    gamma = np.zeros(n + 1)
    gamma[n] = 1.0
    u_ext = np.append(u, 0.0)
    delta1 = ConeSpec(np.zeros((0, n + 1)), [gamma], [u_ext])
    delta2 = ConeSpec(np.zeros((0, n)), [], [-u])
    delta3 = ConeSpec(np.zeros((0, n + 1)), [u_ext, gamma], [])
    return CertificateMatrices(A1, A2, A1p, A2p, delta1, delta2, delta3, structural)


def _restricted(cone: ConeSpec, E) -> ConeSpec:
    return ConeSpec(np.vstack([cone.eq_matrix, E]), cone.nonneg_functionals, cone.strict_functionals)


def _require(case: CaseInfo, tag: Case):
    if case.case_tag is not tag:
        raise WrongCaseError(f"expected case {tag.value}, got {case.case_tag.value}")


def check_interior(s: DerivativeSnapshot, case: CaseInfo,
                   policy: TolerancePolicy | None = None) -> list[ConditionVerdict]:
    policy = resolve(policy)
    _require(case, Case.INTERIOR)
    H = s.hess_xx_f0
    Hwx = _mixed_hessian(s)
    kerH = kernel_basis(H, policy)
    meet = kernel_basis(np.vstack([H, Hwx]), policy)
    return [
        _verdict("interior.hessian_kernel_trivial", kerH.is_trivial, _first(kerH)),
        _verdict("interior.kernels_meet_trivially", meet.is_trivial, _first(meet)),
        _verdict("interior.hessian_kernel_in_mixed_kernel",
                 subspace_contained_in_kernel(kerH, Hwx, policy), _first(kerH)),
    ]


def check_boundary_positive(s: DerivativeSnapshot, case: CaseInfo,
                            policy: TolerancePolicy | None = None) -> list[ConditionVerdict]:
    policy = resolve(policy)
    _require(case, Case.BOUNDARY_POSITIVE)
    m = build_matrices(s, case)
    tangent_row = np.append(s.grad_x_F, 0.0)[None, :]
    L = intersect_with_product_space(m.A1, tangent_row, policy)
    L2 = kernel_basis(np.vstack([m.A1, tangent_row, m.A2]), policy)
    return [
        _verdict("positive.tangent_kernel_trivial", L.is_trivial, _first(L)),
        _verdict("positive.tangent_kernel_meets_A2_trivially", L2.is_trivial, _first(L2)),
        _verdict("positive.tangent_kernel_in_A2_kernel",
                 subspace_contained_in_kernel(L, m.A2, policy), _first(L)),
    ]


def check_boundary_zero(s: DerivativeSnapshot, case: CaseInfo,
                        policy: TolerancePolicy | None = None) -> list[ConditionVerdict]:
    policy = resolve(policy)
    _require(case, Case.BOUNDARY_ZERO)
    m = build_matrices(s, case)
    tangent_row = np.append(s.grad_x_F, 0.0)[None, :]
    meet = kernel_basis(np.vstack([m.A1p, m.A2p]), policy)
    L = intersect_with_product_space(m.A1p, tangent_row, policy)
    ascent = cone_implication(_restricted(m.delta1, m.A1p), m.A2p, policy)
    descent = cone_implication(_restricted(m.delta2, s.hess_xx_f0), _mixed_hessian(s), policy)
    necessary = cone_implication(_restricted(m.delta3, m.A1p), m.A2p, policy)
    return [
        _verdict("zero.kernels_meet_trivially", meet.is_trivial, _first(meet)),
        _verdict("zero.tangent_kernel_in_A2p_kernel",
                 subspace_contained_in_kernel(L, m.A2p, policy), _first(L)),
        _from_implication("zero.ascent_cone_in_A2p_kernel", ascent),
        _from_implication("zero.descent_cone_in_mixed_kernel", descent),
        _from_implication("zero.necessary_cone_in_A2p_kernel", necessary),
    ]


def strong_regularity_verdicts(s: DerivativeSnapshot, case: CaseInfo,
                               policy: TolerancePolicy | None = None) -> list[ConditionVerdict]:
    """Strong regularity via the closed-form criterion and the critical face route."""
    policy = resolve(policy)
    H = qp.lagrangian_hessian(s, case.lam)
    u = s.grad_x_F
    if case.case_tag is Case.INTERIOR:
        # inactive constraint: v0 = (0, F) with F < 0
        face = qp.critical_face_check(H, u, "zero", v0_negative=True, policy=policy)
        return [_verdict("strong.critical_face", face)]
    if case.case_tag is Case.BOUNDARY_POSITIVE:
        closed = qp.strong_regularity_positive(s, case.lam, policy)
        face = qp.critical_face_check(H, u, "positive", policy=policy)
        return [_verdict("strong.kkt_matrix_nonsingular", closed),
                _verdict("strong.critical_face", face)]
    closed = qp.strong_regularity_zero(s, policy)
    face = qp.critical_face_check(H, u, "zero", v0_negative=False, policy=policy)
    return [_verdict("strong.zero_multiplier_criterion", closed),
            _verdict("strong.critical_face", face)]


def _tri(flag: bool | None, *, no_allowed: bool = True) -> str:
    if flag is None:
        return UNKNOWN
    if flag:
        return YES
    return NO if no_allowed else UNKNOWN


def stability_verdict(s: DerivativeSnapshot, case: CaseInfo,
                      policy: TolerancePolicy | None = None) -> StabilityReport:
    """Aggregate the per-case conditions into stability verdicts.

    Robinson stability is only ever asserted (never refuted). Lipschitz
    likeness is "yes"/"no" where a sufficient or necessary condition
    decides it, and "unknown" otherwise.
    """
    policy = resolve(policy)
    notes = []
    tag = case.case_tag
    if tag is Case.INTERIOR:
        conds = check_interior(s, case, policy)
        by = {c.condition_id: c for c in conds}
        robinson = by["interior.hessian_kernel_trivial"].holds
        c1 = by["interior.kernels_meet_trivially"].holds
        c2 = by["interior.hessian_kernel_in_mixed_kernel"].holds
        lip = c2 if c1 else None
    elif tag is Case.BOUNDARY_POSITIVE:
        conds = check_boundary_positive(s, case, policy)
        by = {c.condition_id: c for c in conds}
        robinson = by["positive.tangent_kernel_trivial"].holds
        c1 = by["positive.tangent_kernel_meets_A2_trivially"].holds
        c2 = by["positive.tangent_kernel_in_A2_kernel"].holds
        lip = c2 if c1 else None
    else:
        conds = check_boundary_zero(s, case, policy)
        by = {c.condition_id: c for c in conds}
        sufficient = [by[k].holds for k in (
            "zero.kernels_meet_trivially", "zero.tangent_kernel_in_A2p_kernel",
            "zero.ascent_cone_in_A2p_kernel", "zero.descent_cone_in_mixed_kernel")]
        necessary = by["zero.necessary_cone_in_A2p_kernel"].holds
        if None in sufficient or necessary is None:
            notes.append("a cone implication was indeterminate")
        robinson = True if all(v is True for v in sufficient) else None
        if robinson:
            lip = True
        elif necessary is False:
            lip = False
        else:
            lip = None

    strong = strong_regularity_verdicts(s, case, policy)
    primary = strong[0].holds
    if any(v.holds != primary for v in strong):
        notes.append("strong regularity routes disagree")
        primary = None
    conds = conds + strong
    robinson_label = YES if robinson else UNKNOWN
    return StabilityReport(
        case=case,
        conditions=tuple(conds),
        lipschitz_like=_tri(lip),
        robinson_stable=robinson_label,
        strong_regular=_tri(primary),
        localization=primary is True,
        notes=tuple(notes),
    )
