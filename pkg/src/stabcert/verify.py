"""Monte-Carlo corroboration of Robinson stability and the Lipschitz-like property.

Sample ``i`` of a run draws from its own generator seeded by ``(seed, i)``,
so runs are reproducible, sample streams are prefix-stable, and a run at a
smaller radius reuses the same unit draws (paired comparison).
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .cones import distance_to_ray
from .errors import MFCQError, NotStationaryError
from .model import QpInstance, evaluate, param_distance, qp_snapshot
from .oracle import StationarySet, distance_to_stationary_set, stationary_set
from .stationarity import check_stationarity
from .tolerances import TolerancePolicy, resolve

SCHEMES = ("full", "tilt", "rhs")
MIN_RESIDUAL = 1e-14
#: a run "diverges" when its max ratio grows by this factor as the radius shrinks 10x.
#: Bounded ratios grow by about 1 and a 1/r blow-up by about 10 under paired
#: sampling, so the geometric midpoint separates the two regimes.
DIVERGENCE_FACTOR = math.sqrt(10.0)


@dataclass(frozen=True)
class SamplingConfig:
    radius_x: float = 1e-2
    radius_w: float = 1e-2
    samples: int = 200
    gamma_cap: float | None = None
    seed: int = 0
    scheme: str = "full"
    snap_to_boundary: bool = True
    compare: bool = True

    def __post_init__(self):
        if self.radius_x < 0 or self.radius_w < 0:
            raise ValueError("radii must be nonnegative")
        if int(self.samples) < 1:
            raise ValueError(f"samples must be at least 1, got {self.samples}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown perturbation scheme {self.scheme!r}")

    def shrunk(self, factor: float = 10.0, *, x_too: bool = True) -> "SamplingConfig":
        return replace(self, radius_w=self.radius_w / factor,
                       radius_x=self.radius_x / factor if x_too else self.radius_x,
                       compare=False)


@dataclass
class SampleRecord:
    index: int
    w_distance: float = math.nan
    x_distance: float = math.nan
    residual: float = math.nan
    ratio: float = math.nan
    skipped: str = ""


@dataclass
class EmpiricalEstimate:
    max_ratio: float
    ratios: dict
    skipped: int
    samples: int
    skip_reasons: dict = field(default_factory=dict)
    unreliable: int = 0
    witness_worst: dict | None = None
    divergence_flag: bool | None = None
    comparison_max_ratio: float | None = None
    records: list[SampleRecord] = field(default_factory=list)
    config: SamplingConfig | None = None

    @property
    def used(self) -> int:
        return self.ratios.get("count", 0)

    def summary(self) -> dict:
        cfg = self.config
        return {
            "seed": cfg.seed if cfg else None,
            "radius_x": cfg.radius_x if cfg else None,
            "radius_w": cfg.radius_w if cfg else None,
            "scheme": cfg.scheme if cfg else None,
            "samples": self.samples,
            "max_ratio": self.max_ratio,
            "ratios": self.ratios,
            "skipped": self.skipped,
            "skip_reasons": self.skip_reasons,
            "unreliable": self.unreliable,
            "divergence_flag": self.divergence_flag,
            "comparison_max_ratio": self.comparison_max_ratio,
            "witness_worst": self.witness_worst,
        }


# -- sampling ----------------------------------------------------------------

def _rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index), int(stream)])


def _unit_ball(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Uniform draw from the closed unit ball of R^dim."""
    v = rng.standard_normal(dim)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return v
    return v / nv * rng.random() ** (1.0 / dim)


def _sym_from_upper(vals: np.ndarray, n: int) -> np.ndarray:
    """Symmetric matrix whose Frobenius norm equals the Euclidean norm of ``vals``."""
    M = np.zeros((n, n))
    iu = np.triu_indices(n)
    off = iu[0] != iu[1]
    scaled = vals.copy()
    scaled[off] /= math.sqrt(2.0)
    M[iu] = scaled
    return M + np.triu(M, 1).T


def perturb(instance: QpInstance, config: SamplingConfig, rng: np.random.Generator) -> QpInstance:
    """Add a uniform draw of norm at most ``radius_w`` to the scheme's components."""
    n = instance.n
    m = n * (n + 1) // 2
    blocks = {"full": ("D", "c", "A", "b", "alpha"), "tilt": ("c",), "rhs": ("c", "b", "alpha")}
    sizes = {"D": m, "c": n, "A": m, "b": n, "alpha": 1}
    chosen = blocks[config.scheme]
    z = _unit_ball(rng, sum(sizes[k] for k in chosen)) * config.radius_w
    changes, pos = {}, 0
    for k in chosen:
        part = z[pos:pos + sizes[k]]
        pos += sizes[k]
        if k in ("D", "A"):
            changes[k] = getattr(instance, k) + _sym_from_upper(part, n)
        elif k == "alpha":
            changes[k] = instance.alpha + part[0]
        else:
            changes[k] = getattr(instance, k) + part
    return instance.replace(**changes)


def _snap(instance: QpInstance, x: np.ndarray) -> np.ndarray:
    """Move ``x`` along the constraint gradient onto ``F = 0`` (smallest step)."""
    _, F, _, u = evaluate(instance, x)
    a = 0.5 * float(u @ instance.A @ u)
    b = float(u @ u)
    if b == 0.0:
        return x
    if abs(a) < 1e-14 * b:
        return x - F / b * u
    disc = b * b - 4.0 * a * F
    if disc < 0:
        return x
    sq = math.sqrt(disc)
    roots = ((-b + sq) / (2 * a), (-b - sq) / (2 * a))
    t = min(roots, key=abs)
    return x + t * u


def _residual(instance: QpInstance, x, act: float) -> float:
    _, F, g, u = evaluate(instance, x)
    if F > act:
        return math.inf
    if F < -act:
        return float(np.linalg.norm(g))
    return distance_to_ray(-g, u)


def _require_stationary(instance: QpInstance, x_bar, policy: TolerancePolicy):
    s = qp_snapshot(instance, x_bar)
    check = check_stationarity(s, policy, instance.alpha)
    if not check.mfcq_ok:
        raise MFCQError("MFCQ fails at the reference point")
    if not check.is_stationary:
        raise NotStationaryError("reference point is not stationary", check.residual)
    return s, check.case


def _summarize(ratios: list[float]) -> dict:
    if not ratios:
        return {"count": 0}
    r = np.asarray(ratios)
    return {
        "count": int(r.size),
        "min": float(r.min()),
        "mean": float(r.mean()),
        "median": float(np.median(r)),
        "p90": float(np.quantile(r, 0.9)),
        "max": float(r.max()),
    }


def _finish(records, ratios, worst, unreliable, samples, config) -> EmpiricalEstimate:
    reasons = Counter(r.skipped for r in records if r.skipped)
    return EmpiricalEstimate(
        max_ratio=max(ratios) if ratios else 0.0,
        ratios=_summarize(ratios),
        skipped=samples - len({r.index for r in records if not r.skipped}),
        samples=samples,
        skip_reasons=dict(sorted(reasons.items())),
        unreliable=unreliable,
        witness_worst=worst,
        records=records,
        config=config,
    )


def _divergence(base: EmpiricalEstimate, small: EmpiricalEstimate) -> bool | None:
    if base.used == 0 or small.used == 0:
        return None
    if base.max_ratio == 0.0:
        return small.max_ratio > 0.0
    return bool(small.max_ratio >= DIVERGENCE_FACTOR * base.max_ratio)


# -- Robinson stability ------------------------------------------------------

def verify_robinson(instance: QpInstance, x_bar, config: SamplingConfig,
                    policy: TolerancePolicy | None = None) -> EmpiricalEstimate:
    """Sample ``d(x', S(w')) / residual(x', w')`` near ``(x_bar, w)``.

    When ``x_bar`` is on the boundary and ``snap_to_boundary`` is set, the
    sampled ``x'`` is moved onto the perturbed boundary; otherwise nearly
    every feasible sample sits in the interior with a residual near
    ``|grad f0(x_bar)|`` and falls outside the gamma filter.
    """
    policy = resolve(policy)
    x_bar = np.asarray(x_bar, dtype=float)
    s, case = _require_stationary(instance, x_bar, policy)
    gamma_cap = config.gamma_cap
    if gamma_cap is None:
        gamma_cap = 0.1 * (1.0 + float(np.linalg.norm(s.grad_f0)))
    snap = config.snap_to_boundary and case.is_boundary
    records, ratios = [], []
    worst, unreliable = None, 0
    for i in range(int(config.samples)):
        rng = _rng(config.seed, i)
        w2 = perturb(instance, config, rng)
        x2 = x_bar + config.radius_x * _unit_ball(rng, instance.n)
        if snap:
            x2 = _snap(w2, x2)
        rec = SampleRecord(i, w_distance=param_distance(instance, w2))
        records.append(rec)
        act = policy.activity_tol(w2.alpha)
        rho = _residual(w2, x2, act)
        rec.residual = rho
        if not math.isfinite(rho):
            rec.skipped = "infeasible"
            continue
        if rho >= gamma_cap:
            rec.skipped = "above_gamma"
            continue
        if rho <= MIN_RESIDUAL:
            rec.skipped = "zero_residual"
            continue
        sset = stationary_set(w2, policy)
        if not sset.complete:
            unreliable += 1
            rec.skipped = "oracle_incomplete"
            continue
        delta = distance_to_stationary_set(x2, sset)
        rec.x_distance = delta
        if not math.isfinite(delta):
            rec.skipped = "empty_stationary_set"
            continue
        rec.ratio = delta / rho
        ratios.append(rec.ratio)
        if worst is None or rec.ratio > worst["ratio"]:
            worst = {"sample": i, "ratio": rec.ratio, "x": x2.tolist(),
                     "residual": rho, "distance": delta}
    est = _finish(records, ratios, worst, unreliable, int(config.samples), config)
    if config.compare:
        small = verify_robinson(instance, x_bar, config.shrunk(), policy)
        est.comparison_max_ratio = small.max_ratio
        est.divergence_flag = _divergence(est, small)
    return est


# -- Lipschitz-like property -------------------------------------------------

def _members_near(sset: StationarySet, x_bar, radius: float) -> list[np.ndarray]:
    out = [p.x for p in sset.points if p.isolated and np.linalg.norm(p.x - x_bar) <= radius]
    for fam in sset.families:
        # representative: the family point closest to x_bar
        if fam.distance(x_bar) <= radius and hasattr(fam, "K"):
            rel = x_bar - fam.center
            theta = np.linalg.lstsq(fam.K, rel, rcond=None)[0]
            if np.linalg.norm(theta) > 0:
                out.append(fam.point(theta))
    return out


def verify_lipschitz_like(instance: QpInstance, x_bar, config: SamplingConfig,
                          policy: TolerancePolicy | None = None) -> EmpiricalEstimate:
    """Sample ``d(x', S(w)) / |w' - w|`` over ``x' in S(w') near x_bar``.

    The comparison run shrinks only the parameter radius: the x-neighborhood
    is a fixed set in the Lipschitz-like inclusion.
    """
    policy = resolve(policy)
    x_bar = np.asarray(x_bar, dtype=float)
    _require_stationary(instance, x_bar, policy)
    records, ratios = [], []
    worst, unreliable = None, 0
    for i in range(int(config.samples)):
        w1 = perturb(instance, config, _rng(config.seed, i, 1))
        w2 = perturb(instance, config, _rng(config.seed, i, 2))
        step = param_distance(w1, w2)
        if step <= MIN_RESIDUAL:
            records.append(SampleRecord(i, w_distance=step, skipped="zero_step"))
            continue
        s2 = stationary_set(w2, policy)
        s1 = stationary_set(w1, policy)
        if not (s1.complete and s2.complete):
            unreliable += 1
            records.append(SampleRecord(i, w_distance=step, skipped="oracle_incomplete"))
            continue
        members = _members_near(s2, x_bar, config.radius_x)
        if not members:
            records.append(SampleRecord(i, w_distance=step, skipped="no_member"))
            continue
        for x2 in members:
            delta = distance_to_stationary_set(x2, s1)
            rec = SampleRecord(i, w_distance=step, x_distance=delta)
            records.append(rec)
            if not math.isfinite(delta):
                rec.skipped = "empty_stationary_set"
                continue
            rec.ratio = delta / step
            ratios.append(rec.ratio)
            if worst is None or rec.ratio > worst["ratio"]:
                worst = {"sample": i, "ratio": rec.ratio, "x": x2.tolist(),
                         "w_step": step, "distance": delta}
    est = _finish(records, ratios, worst, unreliable, int(config.samples), config)
    if config.compare:
        small = verify_lipschitz_like(instance, x_bar, config.shrunk(x_too=False), policy)
        est.comparison_max_ratio = small.max_ratio
        est.divergence_flag = _divergence(est, small)
    return est


# -- CSV ---------------------------------------------------------------------

CSV_HEADER = ("sample", "w_distance", "x_distance", "residual", "ratio", "skipped_reason")


def _fmt(v: float) -> str:
    return "" if v != v else format(v, ".17g")


def records_to_csv(records: list[SampleRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.index, _fmt(r.w_distance), _fmt(r.x_distance), _fmt(r.residual),
                         _fmt(r.ratio), r.skipped])
    return buf.getvalue()
