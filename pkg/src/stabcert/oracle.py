"""Brute-force enumeration of the stationary set S(w) of a QP instance.

Three modes:

* interior: ``D x = -c`` restricted to the open feasible set;
* secular: exact boundary enumeration for ``A = I, b = 0, alpha < 0``
  (and, through an affine change of variables, for any positive definite
  ``A``), including the non-isolated families of the hard case;
* general: a lambda-grid scan with root polishing, never certified complete.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq

from .errors import OracleError
from .model import QpInstance, evaluate
from .tolerances import TolerancePolicy, resolve

log = logging.getLogger(__name__)

INTERIOR, BOUNDARY = "interior", "boundary"
#: relative level below which a transformed gradient entry counts as zero
HARD_CASE_RTOL = 1e-11


@dataclass(frozen=True)
class StationaryPoint:
    x: np.ndarray
    lam: float
    kind: str
    isolated: bool = True
    kkt_residual: float = 0.0


@dataclass(frozen=True)
class SphereFamily:
    """Points ``center + K theta`` with ``|theta| = 1`` (an ellipsoidal slice).

    ``K`` is n x k with k >= 2; for the plain trust-region case its columns
    are orthogonal with common length (a round sphere slice).
    """

    center: np.ndarray
    K: np.ndarray
    lam: float
    kind: str = BOUNDARY

    @property
    def dim(self) -> int:
        return self.K.shape[1]

    def point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.center + self.K @ (theta / np.linalg.norm(theta))

    def distance(self, x) -> float:
        return _distance_to_ellipsoid_surface(np.asarray(x, dtype=float) - self.center, self.K)


@dataclass(frozen=True)
class AffineFamily:
    """Interior points ``point + N t`` that keep the constraint strictly inactive."""

    point: np.ndarray
    N: np.ndarray
    instance: QpInstance
    kind: str = INTERIOR
    lam: float = 0.0

    @property
    def dim(self) -> int:
        return self.N.shape[1]

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        t = self.N.T @ (x - self.point)
        proj = self.point + self.N @ t
        if self.instance.constraint(proj) <= 0:
            return float(np.linalg.norm(x - proj))
        return _distance_affine_in_feasible(x, self)


@dataclass
class StationarySet:
    points: list[StationaryPoint] = field(default_factory=list)
    families: list = field(default_factory=list)
    complete: bool = False
    mode: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.points and not self.families

    def isolated(self, kind: str | None = None) -> list[StationaryPoint]:
        return [p for p in self.points if p.isolated and (kind is None or p.kind == kind)]


# -- residuals ---------------------------------------------------------------

def kkt_residual(instance: QpInstance, x, lam: float, kind: str) -> float:
    _, F, g, u = evaluate(instance, x)
    r = float(np.linalg.norm(g + lam * u))
    if kind == BOUNDARY:
        r = max(r, abs(F))
    return r


def _dedupe(points: list[StationaryPoint], tol: float = 1e-9) -> list[StationaryPoint]:
    out: list[StationaryPoint] = []
    for p in sorted(points, key=lambda p: (p.lam, tuple(p.x))):
        if any(np.linalg.norm(p.x - q.x) <= tol * (1.0 + np.linalg.norm(q.x)) for q in out):
            continue
        out.append(p)
    return out


# -- interior ----------------------------------------------------------------

def solve_interior(instance: QpInstance, policy: TolerancePolicy | None = None) -> StationarySet:
    """Solutions of ``D x = -c`` with ``F(x) < 0`` (complete)."""
    policy = resolve(policy)
    act = policy.activity_tol(instance.alpha)
    D, c = instance.D, instance.c
    U, s, Vt = np.linalg.svd(D)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > policy.rank_threshold(D.shape, smax))) if smax > 0 else 0
    result = StationarySet(complete=True, mode="interior")
    if rank == instance.n:
        x = np.linalg.solve(D, -c)
        if instance.constraint(x) < -act:
            result.points.append(
                StationaryPoint(x, 0.0, INTERIOR, True, kkt_residual(instance, x, 0.0, INTERIOR)))
        return result
    # singular: min-norm solution plus the kernel, if consistent
    x0 = -(Vt[:rank].T @ ((U[:, :rank].T @ c) / s[:rank]))
    if np.linalg.norm(D @ x0 + c) > policy.tol * (1.0 + np.linalg.norm(c)):
        return result
    N = Vt[rank:].T.copy()
    fam = AffineFamily(x0, N, instance)
    if _affine_meets_interior(fam, act):
        result.families.append(fam)
        if instance.constraint(x0) < -act:
            result.points.append(StationaryPoint(x0, 0.0, INTERIOR, False,
                                                 kkt_residual(instance, x0, 0.0, INTERIOR)))
    return result


def _affine_meets_interior(fam: AffineFamily, act: float) -> bool:
    """Does ``point + N t`` hit ``{F < 0}``? Exact for convex or concave restrictions."""
    inst = fam.instance
    if inst.constraint(fam.point) < -act:
        return True
    # F(point + N t) = 0.5 t'Qt + r't + F0 with Q = N'AN, r = N'(A p + b)
    Q = fam.N.T @ inst.A @ fam.N
    r = fam.N.T @ (inst.A @ fam.point + inst.b)
    ev = np.linalg.eigvalsh(Q) if Q.size else np.zeros(0)
    if ev.size and ev[0] < -policy_floor(Q):
        return True  # F unbounded below along a direction
    if ev.size and np.all(ev > policy_floor(Q)):
        t = np.linalg.solve(Q, -r)
        return inst.constraint(fam.point + fam.N @ t) < -act
    # positive semidefinite with a flat direction: F decreases without bound iff r leaves range(Q)
    t, *_ = np.linalg.lstsq(Q, -r, rcond=None)
    if np.linalg.norm(Q @ t + r) > 1e-12 * (1.0 + np.linalg.norm(r)):
        return True
    return inst.constraint(fam.point + fam.N @ t) < -act


def policy_floor(Q) -> float:
    return 1e-12 * max(1.0, float(np.abs(Q).max(initial=0.0)))


def _distance_affine_in_feasible(x, fam: AffineFamily) -> float:
    """Best-effort distance to ``{point + N t : F <= 0}`` when the projection is infeasible."""
    from scipy.optimize import minimize

    inst = fam.instance
    t0 = fam.N.T @ (x - fam.point)

    def obj(t):
        d = fam.point + fam.N @ t - x
        return float(d @ d)

    cons = {"type": "ineq", "fun": lambda t: -inst.constraint(fam.point + fam.N @ t)}
    best = math.inf
    for start in (t0, np.zeros(fam.dim)):
        res = minimize(obj, start, constraints=[cons], method="SLSQP")
        if res.success and inst.constraint(fam.point + fam.N @ res.x) <= 1e-9:
            best = min(best, math.sqrt(res.fun))
    return best


# -- ellipsoid surface distance ------------------------------------------------

def _distance_to_ellipsoid_surface(p, K) -> float:
    """``min |p - K theta|`` over unit ``theta`` (exact, via a secular equation)."""
    U, sig, Vt = np.linalg.svd(K, full_matrices=False)
    q = U.T @ p
    # residual form; p'p - q'q loses half the digits when p is near range(K)
    perp2 = float(np.sum((p - U @ q) ** 2))
    # minimize |q - S t|^2 on |t| = 1: (S^2 - mu) t = S q with mu <= min S^2
    sq = sig * q
    s2 = sig ** 2
    smin2 = s2.min()
    cluster = s2 <= smin2 * (1 + 1e-12) + 1e-300
    hard = bool(np.all(np.abs(sq[cluster]) <= 1e-14 * (1.0 + np.abs(sq).max())))
    if hard:
        sq = np.where(cluster, 0.0, sq)
        rest = ~cluster
        t_rest = sq[rest] / (s2[rest] - smin2)
        left = 1.0 - float(t_rest @ t_rest)
        if left >= 0.0:
            t = np.zeros_like(q)
            t[rest] = t_rest
            t[np.flatnonzero(cluster)[0]] = math.sqrt(left)
            return math.sqrt(perp2 + float(np.sum((q - sig * t) ** 2)))
    live = sq != 0.0

    def h(mu):
        return float(np.sum((sq[live] / (s2[live] - mu)) ** 2)) - 1.0

    lo = smin2 - np.abs(sq).sum() - 1.0
    # hard case: h(smin2) = -left > 0; otherwise the cluster term alone is 4 > 1 here
    hi = smin2 if hard else smin2 - 0.5 * np.abs(sq[cluster]).max()
    mu = brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    t = np.zeros_like(q)
    t[live] = sq[live] / (s2[live] - mu)
    t /= np.linalg.norm(t)
    return math.sqrt(perp2 + float(np.sum((q - sig * t) ** 2)))


# -- secular (trust-region) boundary solve ------------------------------------

def _convex_roots(phi, dphi, lo, hi, lo_closed: bool) -> list[float]:
    """Roots of a convex ``phi`` on ``(lo, hi)``; ``phi(hi) > 0`` or ``hi`` is a right bound with phi < 0."""
    roots = []
    flo, fhi = phi(lo), phi(hi)
    if lo_closed and flo == 0.0:
        roots.append(lo)
    dlo, dhi = dphi(lo), dphi(hi)
    if dlo < 0 < dhi:
        m = brentq(dphi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        fm = phi(m)
        if fm > 0:
            return roots
        if fm == 0.0:
            return roots + [m]
        if flo > 0:
            roots.append(_root(phi, lo, m))
        if fhi > 0:
            roots.append(_root(phi, m, hi))
        return roots
    if flo * fhi < 0:
        roots.append(_root(phi, lo, hi))
    return roots


def _root(f, a, b) -> float:
    return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_trs_boundary(instance: QpInstance, policy: TolerancePolicy | None = None) -> StationarySet:
    """All boundary KKT points with ``lam >= 0`` for ``A = I, b = 0, alpha < 0``."""
    policy = resolve(policy)
    if not instance.is_trs(tol=1e-12):
        raise OracleError("secular mode needs A = I, b = 0 and alpha < 0")
    lam_eig, Q = eigh(instance.D)
    g = Q.T @ instance.c
    rho2 = -2.0 * instance.alpha
    rho = math.sqrt(rho2)
    n = instance.n
    cscale = float(np.linalg.norm(instance.c))
    zero_g = np.abs(g) <= HARD_CASE_RTOL * cscale

    # clusters of (numerically) equal eigenvalues
    dscale = max(1.0, float(np.abs(lam_eig).max()))
    clusters: list[list[int]] = []
    for i in range(n):
        if clusters and lam_eig[i] - lam_eig[clusters[-1][0]] <= 1e-12 * dscale:
            clusters[-1].append(i)
        else:
            clusters.append([i])

    gw = np.where(zero_g, 0.0, g)
    poles = []  # (position, weight) with position -lambda_i
    for cl in clusters:
        w = float(np.sum(gw[cl] ** 2))
        if w > 0:
            poles.append((-float(np.mean(lam_eig[cl])), w))
    poles.sort()

    def y_of(lam):
        return -gw / (lam_eig + lam)

    def phi(lam):
        return float(np.sum((gw / (lam_eig + lam)) ** 2)) - rho2

    def dphi(lam):
        return float(-2.0 * np.sum(gw ** 2 / (lam_eig + lam) ** 3))

    result = StationarySet(complete=True, mode="secular")
    candidates: list[float] = []
    if poles:
        gnorm = math.sqrt(sum(w for _, w in poles))
        edges = [p for p, _ in poles]
        intervals = [(-math.inf, edges[0])]
        intervals += list(zip(edges[:-1], edges[1:]))
        intervals.append((edges[-1], edges[-1] + 2.0 * gnorm / rho + 1.0))
        weights = {p: w for p, w in poles}
        for a, b in intervals:
            if b <= 0.0:
                continue
            lo = 0.0 if a < 0.0 else a + _pole_offset(weights[a], rho, b - a)
            hi = b - _pole_offset(weights[b], rho, b - lo) if b in weights else b
            if hi <= lo:
                continue
            lo_closed = a < 0.0
            candidates += _convex_roots(phi, dphi, lo, hi, lo_closed)
    for lam in candidates:
        y = y_of(lam)
        x = Q @ y
        result.points.append(StationaryPoint(x, float(lam), BOUNDARY, True,
                                             kkt_residual(instance, x, lam, BOUNDARY)))

    # hard case: lam = -lambda_k >= 0 on a cluster with vanishing gradient weight
    for cl in clusters:
        lam = -float(np.mean(lam_eig[cl]))
        if lam < -policy.tol or not np.all(zero_g[cl]):
            continue
        lam = max(lam, 0.0)
        rest = np.setdiff1d(np.arange(n), cl)
        y = np.zeros(n)
        y[rest] = -gw[rest] / (lam_eig[rest] + lam)
        left = rho2 - float(y @ y)
        if left <= 1e-12 * rho2:
            continue  # the residual point (if any) is a secular root already
        r = math.sqrt(left)
        center = Q @ y
        basis = Q[:, cl]
        if len(cl) == 1:
            for sg in (1.0, -1.0):
                x = center + sg * r * basis[:, 0]
                result.points.append(StationaryPoint(x, lam, BOUNDARY, True,
                                                     kkt_residual(instance, x, lam, BOUNDARY)))
        else:
            result.families.append(SphereFamily(center, r * basis, lam))
            x = center + r * basis[:, 0]
            result.points.append(StationaryPoint(x, lam, BOUNDARY, False,
                                                 kkt_residual(instance, x, lam, BOUNDARY)))
    result.points = _dedupe(result.points)
    return result


def _pole_offset(weight, rho, room) -> float:
    """Offset from a pole at which the secular function is surely positive."""
    return min(0.5 * math.sqrt(weight) / rho, 0.25 * room)


# -- positive definite A: reduce to the trust-region form ---------------------

def _pd_factor(A, policy: TolerancePolicy):
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(L)) <= math.sqrt(policy.tol) * math.sqrt(max(1.0, np.abs(A).max())):
        return None
    return L


def _solve_via_reduction(instance: QpInstance, L, policy: TolerancePolicy) -> StationarySet:
    """x = x0 + M z with M = L^{-T} maps the constraint to 0.5|z|^2 + alpha'."""
    A, b = instance.A, instance.b
    x0 = -np.linalg.solve(A, b)
    alpha_r = instance.alpha + 0.5 * float(b @ x0)
    M = np.linalg.inv(L).T
    if alpha_r >= 0:
        out = StationarySet(complete=True, mode="secular")
        if alpha_r <= policy.activity_tol(instance.alpha):
            out.notes.append("feasible set is a single point; MFCQ fails there")
        return out
    D_r = M.T @ instance.D @ M
    c_r = M.T @ (instance.D @ x0 + instance.c)
    reduced = QpInstance(D=0.5 * (D_r + D_r.T), c=c_r, A=np.eye(instance.n),
                         b=np.zeros(instance.n), alpha=alpha_r)
    inner = solve_trs_boundary(reduced, policy)
    out = StationarySet(complete=True, mode="secular")
    for p in inner.points:
        x = x0 + M @ p.x
        out.points.append(StationaryPoint(x, p.lam, BOUNDARY, p.isolated,
                                          kkt_residual(instance, x, p.lam, BOUNDARY)))
    for fam in inner.families:
        out.families.append(SphereFamily(x0 + M @ fam.center, M @ fam.K, fam.lam))
    return out


# -- general boundary fallback -------------------------------------------------

def default_lambda_max(instance: QpInstance) -> float:
    grad_scale = max(np.linalg.norm(instance.A, 2), np.linalg.norm(instance.b), 1e-12)
    return 10.0 * (1.0 + np.linalg.norm(instance.D, 2) + np.linalg.norm(instance.c)) / min(1.0, grad_scale)


def solve_general_boundary(instance: QpInstance, grid_size: int = 4000, newton_iters: int = 50,
                           lambda_max: float | None = None,
                           policy: TolerancePolicy | None = None) -> StationarySet:
    """Best-effort boundary enumeration for arbitrary ``A``: scan, bracket and polish."""
    policy = resolve(policy)
    lam_max = default_lambda_max(instance) if lambda_max is None else float(lambda_max)
    D, A, c, b = instance.D, instance.A, instance.c, instance.b
    n = instance.n
    out = StationarySet(complete=False, mode="general")

    def x_of(lam):
        return np.linalg.solve(D + lam * A, -(c + lam * b))

    def F_of(lam):
        return instance.constraint(x_of(lam))

    # pencil breakpoints where D + lam A is singular
    with np.errstate(all="ignore"):
        pencil = eigh(D, -A, eigvals_only=True) if _pd_factor(-A, policy) is not None else None
    if pencil is None:
        ev = np.linalg.eigvals(np.linalg.solve(A, -D)) if np.linalg.matrix_rank(A) == n else np.array([])
        pencil = np.real(ev[np.abs(np.imag(ev)) < 1e-12]) if ev.size else ev
    breaks = sorted(float(p) for p in np.atleast_1d(pencil) if 0.0 <= p <= lam_max)

    # geometric-plus-linear grid, refined around breakpoints
    grid = np.unique(np.concatenate([
        np.linspace(0.0, lam_max, grid_size),
        np.geomspace(1e-8, lam_max, grid_size // 2) if lam_max > 1e-8 else [],
        *[p + np.geomspace(1e-10, 1e-2, 20) * s for p in breaks for s in (-1.0, 1.0)],
    ]))
    grid = grid[(grid >= 0.0) & (grid <= lam_max)]
    vals = []
    for lam in grid:
        M = D + lam * A
        if np.linalg.cond(M) > 1e12:
            vals.append(math.nan)
        else:
            vals.append(F_of(lam))
    vals = np.asarray(vals)
    found = []
    if vals.size and vals[0] == 0.0:
        found.append(0.0)
    for i in range(len(grid) - 1):
        f1, f2 = vals[i], vals[i + 1]
        if not (np.isfinite(f1) and np.isfinite(f2)) or f1 * f2 > 0:
            continue
        if f2 == 0.0:
            found.append(float(grid[i + 1]))
            continue
        try:
            lam = brentq(F_of, grid[i], grid[i + 1], xtol=1e-15, maxiter=newton_iters * 10)
        except (ValueError, RuntimeError, np.linalg.LinAlgError):
            continue
        found.append(lam)
    for lam in found:
        x = x_of(lam)
        res = kkt_residual(instance, x, lam, BOUNDARY)
        if res <= 1e-6 * (1.0 + np.linalg.norm(x)):  # rejects pole crossings
            out.points.append(StationaryPoint(x, float(lam), BOUNDARY, True, res))

    # singular pencil points: x = x_p + N t, F quadratic along a one-dimensional kernel
    for lam in breaks:
        M = D + lam * A
        rhs = -(c + lam * b)
        xp, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.linalg.norm(M @ xp - rhs) > 1e-9 * (1.0 + np.linalg.norm(rhs)):
            continue
        U, s, Vt = np.linalg.svd(M)
        N = Vt[s <= 1e-9 * max(1.0, s[0])].T
        if N.shape[1] != 1:
            if N.shape[1] > 1:
                out.notes.append(f"kernel of dimension {N.shape[1]} at lambda={lam:.6g} not enumerated")
            continue
        v = N[:, 0]
        qa = 0.5 * float(v @ A @ v)
        qb = float(v @ (A @ xp + b))
        qc = instance.constraint(xp)
        for t in np.roots([qa, qb, qc]) if abs(qa) > 1e-14 else ([-qc / qb] if abs(qb) > 1e-14 else []):
            if abs(np.imag(t)) > 1e-10:
                continue
            x = xp + float(np.real(t)) * v
            res = kkt_residual(instance, x, lam, BOUNDARY)
            if res <= 1e-8 * (1.0 + np.linalg.norm(x)):
                out.points.append(StationaryPoint(x, float(lam), BOUNDARY, True, res))
    out.points = [p for p in _dedupe(out.points)
                  if np.linalg.norm(evaluate(instance, p.x)[3]) > policy.tol]
    return out


# -- dispatch ----------------------------------------------------------------

def stationary_set(instance: QpInstance, policy: TolerancePolicy | None = None) -> StationarySet:
    """Interior points plus boundary points; ``complete`` when the boundary solve is exact."""
    policy = resolve(policy)
    interior = solve_interior(instance, policy)
    if instance.is_trs(tol=1e-12):
        boundary = solve_trs_boundary(instance, policy)
    else:
        L = _pd_factor(instance.A, policy)
        boundary = (_solve_via_reduction(instance, L, policy) if L is not None
                    else solve_general_boundary(instance, policy=policy))
    return StationarySet(
        points=interior.points + boundary.points,
        families=interior.families + boundary.families,
        complete=interior.complete and boundary.complete,
        mode=boundary.mode,
        notes=interior.notes + boundary.notes,
    )


def distance_to_stationary_set(x, sset: StationarySet) -> float:
    """Euclidean distance from ``x`` to the points and families; ``inf`` if empty."""
    x = np.asarray(x, dtype=float)
    best = math.inf
    for p in sset.points:
        best = min(best, float(np.linalg.norm(x - p.x)))
    for fam in sset.families:
        best = min(best, fam.distance(x))
    return best
