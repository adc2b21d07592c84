import numpy as np
import pytest
from scipy.optimize import linprog

from stabcert.simplex import FEASIBLE, INDETERMINATE, INFEASIBLE, phase_one


def test_trivially_feasible():
    res = phase_one(np.zeros((0, 2)), [])
    assert res.status == FEASIBLE


def test_simple_feasible_point_satisfies_system():
    G = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    h = [1.0, 0.0, 3.0]
    res = phase_one(G, h)
    assert res.status == FEASIBLE
    assert np.all(G @ res.y >= np.asarray(h) - 1e-9)


def test_contradictory_system():
    # y >= 1 and -y >= 0
    res = phase_one([[1.0], [-1.0]], [1.0, 0.0])
    assert res.status == INFEASIBLE


def test_negative_rhs_rejected():
    with pytest.raises(ValueError):
        phase_one([[1.0]], [-1.0])


def test_iteration_cap_reports_indeterminate():
    G = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    res = phase_one(G, [1.0, 1.0, 1.0], max_iter=0)
    assert res.status == INDETERMINATE


def test_agrees_with_linprog():
    rng = np.random.default_rng(1)
    for _ in range(300):
        m, k = rng.integers(1, 6), rng.integers(1, 5)
        G = rng.standard_normal((m, k))
        h = np.where(rng.random(m) < 0.5, 0.0, 1.0)
        res = phase_one(G, h)
        ref = linprog(np.zeros(k), A_ub=-G, b_ub=-h, bounds=[(None, None)] * k, method="highs")
        assert res.status != INDETERMINATE
        assert (res.status == FEASIBLE) == (ref.status == 0)
        if res.status == FEASIBLE:
            assert np.all(G @ res.y >= h - 1e-8)
