import math

import numpy as np
import pytest

from generators import positive_lambda_instance, zero_lambda_instance
from stabcert import instances as I
from stabcert.certificates import (
    CATALOG, FAILS, HOLDS, NO, UNKNOWN, YES, build_matrices, check_boundary_positive,
    check_boundary_zero, check_interior, strong_regularity_verdicts, stability_verdict,
)
from stabcert.errors import WrongCaseError
from stabcert.model import MAX_EXPLICIT_DIM, DerivativeSnapshot, QpInstance, qp_snapshot
from stabcert.qp import bordered_test_positive_lambda, interior_test, strong_regularity_zero
from stabcert.stationarity import Case, CaseInfo, classify_case

R63 = math.sqrt(63.0)


def _analyze(inst, x):
    s = qp_snapshot(inst, x)
    return s, classify_case(s, alpha=inst.alpha)


def _by_id(verdicts):
    return {v.condition_id: v for v in verdicts}


def _zero_example():
    return QpInstance(D=np.eye(2), c=[-1.0, 0.0], A=np.eye(2), b=[0, 0], alpha=-0.5), [1.0, 0.0]


def _zero_saddle():
    return QpInstance(D=np.diag([1.0, -1.0]), c=[0.0, 1.0], A=np.eye(2), b=[0, 0],
                      alpha=-0.5), [0.0, 1.0]


# -- matrices ----------------------------------------------------------------

def test_matrices_for_2d_saddle():
    s, case = _analyze(I.saddle_2d(), I.saddle_2d_points()["upper"])
    m = build_matrices(s, case)
    expected = np.array([[8.0, 0.0, -1 / 8], [0.0, 0.0, R63 / 8]])
    assert np.allclose(m.A1, expected, atol=1e-12)
    assert m.A1.shape == (2, 3) and m.A2.shape == (s.grad_w_F.size, 3)
    assert np.array_equal(m.A1[:, -1], s.grad_x_F)
    assert not m.structural
    # full column rank of A2 and A2' under the QP structure
    assert np.linalg.matrix_rank(m.A2) == 3 and np.linalg.matrix_rank(m.A2p) == 3


def test_matrices_collapse_at_zero_multiplier():
    s, case = _analyze(*_zero_example())
    m = build_matrices(s, case)
    assert np.array_equal(m.A1, m.A1p) and np.array_equal(m.A2, m.A2p)


def test_matrices_scalar_assembly():
    s = DerivativeSnapshot(x_bar=[0.0], grad_f0=[-3.0], hess_xx_f0=[[2.0]], F_value=0.0,
                           grad_x_F=[1.0], hess_xx_F=[[0.0]], qp_structure=True)
    m = build_matrices(s, CaseInfo(Case.BOUNDARY_POSITIVE, 3.0, 0.0))
    assert m.A1.tolist() == [[2.0, 1.0]]
    assert m.structural and np.array_equal(m.A2, np.eye(2))


def test_large_instance_is_structural():
    n = MAX_EXPLICIT_DIM + 1
    inst = QpInstance(D=np.eye(n), c=np.zeros(n), A=np.eye(n), b=np.zeros(n), alpha=-0.5)
    s, case = _analyze(inst, np.zeros(n))
    r = stability_verdict(s, case)
    assert build_matrices(s, case).structural
    assert r.robinson_stable == YES and r.lipschitz_like == YES


# -- interior ----------------------------------------------------------------

def test_interior_examples():
    inst = QpInstance(D=np.eye(2), c=[0, 0], A=np.eye(2), b=[0, 0], alpha=-0.5)
    v = check_interior(*_analyze(inst, [0.0, 0.0]))
    assert all(c.status == HOLDS for c in v)
    inst = QpInstance(D=np.diag([0.0, -8.0]), c=[0, 0], A=np.eye(2), b=[0, 0], alpha=-0.5)
    v = _by_id(check_interior(*_analyze(inst, [0.0, 0.0])))
    assert v["interior.hessian_kernel_trivial"].status == FAILS
    w = v["interior.hessian_kernel_trivial"].witness
    assert abs(abs(w[0]) - 1.0) < 1e-15


def test_interior_random_against_determinant():
    rng = np.random.default_rng(40)
    for k in range(60):
        n = int(rng.integers(1, 5))
        M = rng.integers(-2, 3, size=(n, n)).astype(float)
        if k % 2:
            M[:, 0] = M[:, 1 % n] if n > 1 else 0.0   # force a rank drop
        D = M @ M.T - (k % 3) * np.eye(n) if k % 4 == 0 else M + M.T
        inst = QpInstance(D=D, c=np.zeros(n), A=np.eye(n), b=np.zeros(n), alpha=-0.5)
        s, case = _analyze(inst, np.zeros(n))
        v = _by_id(check_interior(s, case))
        _, nonsingular = interior_test(D)
        assert (v["interior.hessian_kernel_trivial"].status == HOLDS) == nonsingular
        assert (v["interior.hessian_kernel_in_mixed_kernel"].status == HOLDS) == nonsingular
        # the mixed Hessian has a trivial kernel, so the intersection always is
        assert v["interior.kernels_meet_trivially"].status == HOLDS


def test_interior_without_qp_structure():
    base = dict(x_bar=[0.0, 0.0], grad_f0=[0.0, 0.0], hess_xx_f0=np.diag([1.0, 0.0]), F_value=-1.0,
                grad_x_F=[0.0, 0.0], hess_xx_F=np.eye(2), grad_w_F=[0.0], hess_wx_F=[[0.0, 0.0]])
    case = CaseInfo(Case.INTERIOR, 0.0, 1.0)
    # ker H = span(e2) lies in ker Hwx but meets it nontrivially
    r = stability_verdict(DerivativeSnapshot(**base, hess_wx_f0=[[1.0, 0.0]]), case)
    assert r.condition("interior.kernels_meet_trivially").status == FAILS
    assert r.condition("interior.hessian_kernel_in_mixed_kernel").status == HOLDS
    assert r.lipschitz_like == UNKNOWN and r.robinson_stable == UNKNOWN
    r = stability_verdict(DerivativeSnapshot(**base, hess_wx_f0=[[0.0, 1.0]]), case)
    assert r.condition("interior.kernels_meet_trivially").status == HOLDS
    assert r.condition("interior.hessian_kernel_in_mixed_kernel").status == FAILS
    assert r.lipschitz_like == NO


# -- positive multiplier -----------------------------------------------------

def test_positive_examples():
    v = _by_id(check_boundary_positive(*_analyze(I.saddle_2d(), I.saddle_2d_points()["upper"])))
    assert all(c.status == HOLDS for c in v.values())
    v = _by_id(check_boundary_positive(*_analyze(I.saddle_3d(), I.saddle_3d_circle_point(0.0))))
    assert v["positive.tangent_kernel_trivial"].status == FAILS
    assert v["positive.tangent_kernel_meets_A2_trivially"].status == HOLDS
    w = v["positive.tangent_kernel_trivial"].witness
    assert np.linalg.norm(w) > 0


def test_positive_random_equivalence():
    rng = np.random.default_rng(41)
    seen = set()
    for _ in range(100):
        inst, x, lam = positive_lambda_instance(rng)
        s, case = _analyze(inst, x)
        assert case.case_tag is Case.BOUNDARY_POSITIVE
        v = _by_id(check_boundary_positive(s, case))
        _, det_ok = bordered_test_positive_lambda(inst, x, case.lam)
        trivial = v["positive.tangent_kernel_trivial"].status == HOLDS
        inclusion = v["positive.tangent_kernel_in_A2_kernel"].status == HOLDS
        assert trivial == inclusion == det_ok
        assert v["positive.tangent_kernel_meets_A2_trivially"].status == HOLDS
        seen.add(det_ok)
    assert seen == {True, False}


# -- zero multiplier ---------------------------------------------------------

def test_zero_examples():
    v = _by_id(check_boundary_zero(*_analyze(*_zero_example())))
    assert all(c.status == HOLDS for c in v.values())
    # grad_x F = e1 and ker A1' = span((-1, 0, 1)): the ascent cone is empty
    assert v["zero.ascent_cone_in_A2p_kernel"].vacuous
    v = _by_id(check_boundary_zero(*_analyze(*_zero_saddle())))
    assert v["zero.ascent_cone_in_A2p_kernel"].status == FAILS
    assert v["zero.necessary_cone_in_A2p_kernel"].status == FAILS
    w = v["zero.ascent_cone_in_A2p_kernel"].witness
    assert np.allclose(w / w[2], [0.0, 1.0, 1.0], atol=1e-12)


def test_zero_sufficient_implies_strong_regularity():
    rng = np.random.default_rng(42)
    seen = 0
    for _ in range(150):
        inst, x = zero_lambda_instance(rng)
        s, case = _analyze(inst, x)
        assert case.case_tag is Case.BOUNDARY_ZERO
        v = _by_id(check_boundary_zero(s, case))
        if all(v[k].status == HOLDS for k in ("zero.kernels_meet_trivially",
                                               "zero.tangent_kernel_in_A2p_kernel",
                                               "zero.ascent_cone_in_A2p_kernel")):
            seen += 1
            assert strong_regularity_zero(s)
    assert seen > 10


# -- aggregation -------------------------------------------------------------

@pytest.mark.parametrize("name", ["upper", "lower", "pole"])
def test_saddle_2d_all_points_robinson(name):
    r = stability_verdict(*_analyze(I.saddle_2d(), I.saddle_2d_points()[name]))
    assert r.robinson_stable == YES and r.lipschitz_like == YES
    assert r.strong_regular == YES and r.localization


def test_saddle_3d_verdicts():
    r = stability_verdict(*_analyze(I.saddle_3d(), I.saddle_3d_circle_point(0.0)))
    assert r.lipschitz_like == NO and r.robinson_stable == UNKNOWN
    assert r.strong_regular == NO and not r.localization
    r = stability_verdict(*_analyze(I.saddle_3d(), I.saddle_3d_pole()))
    assert r.robinson_stable == YES


def test_zero_case_aggregation():
    r = stability_verdict(*_analyze(*_zero_example()))
    assert r.robinson_stable == YES and r.lipschitz_like == YES and r.strong_regular == YES
    r = stability_verdict(*_analyze(*_zero_saddle()))
    assert r.robinson_stable == UNKNOWN and r.lipschitz_like == NO and r.strong_regular == NO


def test_strong_routes_listed():
    s, case = _analyze(I.saddle_2d(), I.saddle_2d_points()["upper"])
    ids = [v.condition_id for v in strong_regularity_verdicts(s, case)]
    assert ids == ["strong.kkt_matrix_nonsingular", "strong.critical_face"]


def test_verdicts_invariant_under_rescaling():
    rng = np.random.default_rng(43)
    for k in range(40):
        if k % 2:
            inst, x, _ = positive_lambda_instance(rng)
        else:
            inst, x = zero_lambda_instance(rng)
        base = stability_verdict(*_analyze(inst, x))
        for t in (0.5, 2.0):
            r = stability_verdict(*_analyze(inst.scaled_constraint(t), x))
            assert [c.status for c in r.conditions] == [c.status for c in base.conditions]
            assert (r.lipschitz_like, r.robinson_stable, r.strong_regular) == \
                (base.lipschitz_like, base.robinson_stable, base.strong_regular)


def test_wrong_case_errors():
    s, case = _analyze(I.saddle_2d(), I.saddle_2d_points()["upper"])
    with pytest.raises(WrongCaseError):
        check_interior(s, case)
    with pytest.raises(WrongCaseError):
        check_boundary_zero(s, case)
    s, case = _analyze(*_zero_example())
    with pytest.raises(WrongCaseError):
        check_boundary_positive(s, case)


def test_condition_ids_in_catalog():
    for inst, x in [(I.saddle_2d(), I.saddle_2d_points()["upper"]), _zero_example(),
                    (QpInstance(D=np.eye(2), c=[0, 0], A=np.eye(2), b=[0, 0], alpha=-0.5), [0, 0])]:
        r = stability_verdict(*_analyze(inst, x))
        for c in r.conditions:
            assert c.condition_id in CATALOG
            assert c.to_dict()["description"] == CATALOG[c.condition_id]
