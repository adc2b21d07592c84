"""Kernels, subspace inclusions and implications over polyhedral cones."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import simplex
from .errors import DimensionError
from .tolerances import TolerancePolicy, resolve


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis stored as the columns of ``vectors`` (ambient x dim)."""

    ambient_dim: int
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.dim == 0

    def __iter__(self):
        return iter(self.vectors.T)


def kernel_basis(M, policy: TolerancePolicy | None = None) -> SubspaceBasis:
    """Orthonormal basis of ``{z : M z = 0}`` from the SVD of ``M``.

    Singular values at or below ``max(rows, cols) * eps * sigma_max``
    (or the policy override) count as zero.
    """
    policy = resolve(policy)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if rows == 0:
        return SubspaceBasis(cols, np.eye(cols))
    U, s, vt = np.linalg.svd(M, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return SubspaceBasis(cols, np.eye(cols))
    rank = int(np.count_nonzero(s > policy.rank_threshold(M.shape, smax)))
    N = vt[rank:].T
    if N.shape[1] and rank:
        # one correction step removes the SVD backward error from M N
        corr = vt[:rank].T @ ((U[:, :rank].T @ (M @ N)) / s[:rank, None])
        N, _ = np.linalg.qr(N - corr)
    return SubspaceBasis(cols, N.copy())


def numerical_rank(M, policy: TolerancePolicy | None = None) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return M.shape[1] - kernel_basis(M, policy).dim


def is_nonsingular(M, policy: TolerancePolicy | None = None) -> bool:
    """Square ``M`` is nonsingular iff its smallest singular value exceeds the rank threshold."""
    policy = resolve(policy)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got {M.shape}")
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return False
    return bool(s[-1] > policy.rank_threshold(M.shape, s[0]))


def subspace_contained_in_kernel(B: SubspaceBasis, T, policy: TolerancePolicy | None = None) -> bool:
    policy = resolve(policy)
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if T.shape[1] != B.ambient_dim:
        raise DimensionError(f"T acts on dimension {T.shape[1]}, basis lives in {B.ambient_dim}")
    if B.is_trivial:
        return True
    bound = policy.tol * (1.0 + np.linalg.norm(T, 2))
    return bool(np.all(np.linalg.norm(T @ B.vectors, axis=0) <= bound))


def intersect_with_product_space(M1, extra_rows, policy: TolerancePolicy | None = None) -> SubspaceBasis:
    """Basis of ``ker M1 ∩ ker extra_rows``."""
    M1 = np.atleast_2d(np.asarray(M1, dtype=float))
    extra = np.atleast_2d(np.asarray(extra_rows, dtype=float))
    if M1.shape[1] != extra.shape[1]:
        raise DimensionError(f"column counts differ: {M1.shape[1]} vs {extra.shape[1]}")
    return kernel_basis(np.vstack([M1, extra]), policy)


def distance_to_ray(g, u) -> float:
    """``min_{t >= 0} |g - t u|``."""
    g = np.asarray(g, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    scale = float(np.abs(u).max(initial=0.0))
    if scale == 0.0:
        return float(np.linalg.norm(g))
    # unit direction via a max-scaled copy, so tiny or huge u cannot under- or overflow u'u
    e = u / scale
    e /= np.linalg.norm(e)
    ge = float(g @ e)
    if ge <= 0.0:
        return float(np.linalg.norm(g))
    # norm of the residual vector; avoids the cancellation in |g|^2 - (g'e)^2
    return float(np.linalg.norm(g - ge * e))


# -- cone implications -------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    """The cone ``{z : E z = 0, sigma'z >= 0 (each), s'z > 0 (each)}``."""

    eq_matrix: np.ndarray
    nonneg_functionals: Sequence[np.ndarray] = field(default_factory=tuple)
    strict_functionals: Sequence[np.ndarray] = field(default_factory=tuple)

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float))
        dim = E.shape[1]
        fixed = []
        for name in ("nonneg_functionals", "strict_functionals"):
            vecs = tuple(np.asarray(v, dtype=float).ravel() for v in getattr(self, name))
            for v in vecs:
                if v.size != dim:
                    raise DimensionError(f"{name} entry has length {v.size}, expected {dim}")
            fixed.append(vecs)
        object.__setattr__(self, "eq_matrix", E)
        object.__setattr__(self, "nonneg_functionals", fixed[0])
        object.__setattr__(self, "strict_functionals", fixed[1])

    @property
    def dim(self) -> int:
        return self.eq_matrix.shape[1]


HOLDS = "holds"
FAILS = "fails"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ImplicationVerdict:
    status: str
    witness: np.ndarray | None = None
    vacuous: bool = False

    @property
    def holds(self) -> bool | None:
        if self.status == INDETERMINATE:
            return None
        return self.status == HOLDS


def _reduced_rows(vectors, N, floor):
    """Project functionals onto kernel coordinates and normalize; None marks a vanishing row."""
    out = []
    for v in vectors:
        r = N.T @ v
        nr = np.linalg.norm(r)
        out.append(None if nr <= floor * max(np.linalg.norm(v), 1e-300) else r / nr)
    return out


def cone_implication(premise: ConeSpec, conclusion, policy: TolerancePolicy | None = None) -> ImplicationVerdict:
    """Decide whether every ``z`` in the premise cone satisfies ``T z = 0``.

    The implication fails iff for some row ``r`` of ``T`` and sign ``sg``
    the system ``{E z = 0, sigma'z >= 0, s'z >= 1, sg r'z >= 1}`` is
    feasible (conic normalization of the strict parts). Each system is
    solved in the coordinates of an orthonormal kernel basis of ``E``.
    """
    policy = resolve(policy)
    T = np.atleast_2d(np.asarray(conclusion, dtype=float))
    if T.shape[1] != premise.dim:
        raise DimensionError(f"conclusion acts on {T.shape[1]}, premise lives in {premise.dim}")
    N = kernel_basis(premise.eq_matrix, policy).vectors
    k = N.shape[1]
    if k == 0:
        return ImplicationVerdict(HOLDS, vacuous=True)

    floor = 1e-12
    nonneg = [r for r in _reduced_rows(premise.nonneg_functionals, N, floor) if r is not None]
    strict = _reduced_rows(premise.strict_functionals, N, floor)
    if any(r is None for r in strict):
        # a strict functional vanishing on ker E empties the premise
        return ImplicationVerdict(HOLDS, vacuous=True)

    base_rows = nonneg + strict
    base_rhs = [0.0] * len(nonneg) + [1.0] * len(strict)

    def solve(extra_row=None):
        rows, rhs = list(base_rows), list(base_rhs)
        if extra_row is not None:
            rows.append(extra_row)
            rhs.append(1.0)
        G = np.array(rows).reshape(len(rows), k)
        return simplex.phase_one(G, rhs, feas_tol=policy.feas_tol)

    # vacuity: does the premise contain anything besides the origin?
    if strict:
        res = solve()
        if res.status == simplex.INDETERMINATE:
            return ImplicationVerdict(INDETERMINATE)
        if res.status == simplex.INFEASIBLE:
            return ImplicationVerdict(HOLDS, vacuous=True)
    else:
        nonempty = False
        for j in range(k):
            for sg in (1.0, -1.0):
                e = np.zeros(k)
                e[j] = sg
                res = solve(e)
                if res.status == simplex.INDETERMINATE:
                    return ImplicationVerdict(INDETERMINATE)
                if res.status == simplex.FEASIBLE:
                    nonempty = True
                    break
            if nonempty:
                break
        if not nonempty:
            return ImplicationVerdict(HOLDS, vacuous=True)

    TN = T @ N
    indeterminate = False
    for row, orig in zip(TN, T):
        nr = np.linalg.norm(row)
        if nr <= floor * max(np.linalg.norm(orig), 1e-300):
            continue
        for sg in (1.0, -1.0):
            res = solve(sg * row / nr)
            if res.status == simplex.INDETERMINATE:
                indeterminate = True
                continue
            if res.status == simplex.FEASIBLE:
                z = N @ res.y
                viol = np.abs(T @ z).max()
                return ImplicationVerdict(FAILS, witness=z / viol)
    if indeterminate:
        return ImplicationVerdict(INDETERMINATE)
    return ImplicationVerdict(HOLDS)


def premise_satisfied(premise: ConeSpec, z, tol: float = 1e-8) -> bool:
    """Check that ``z`` lies in the premise cone (strict parts as ``> 0``)."""
    z = np.asarray(z, dtype=float).ravel()
    nz = max(np.linalg.norm(z), 1e-300)
    E = premise.eq_matrix
    if E.size and np.linalg.norm(E @ z) > tol * (1.0 + np.linalg.norm(E, 2)) * nz:
        return False
    if any(s @ z < -tol * np.linalg.norm(s) * nz for s in premise.nonneg_functionals):
        return False
    return all(s @ z > 0 for s in premise.strict_functionals)
