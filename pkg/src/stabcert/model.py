"""QP instances, evaluation and derivative snapshots at a reference point.

The objective is ``0.5 x'Dx + c'x`` and the single constraint is
``0.5 x'Ax + b'x + alpha <= 0``. The parameter vector is laid out as
``w = (D row-major, c, A row-major, b, alpha)``, so ``d = 2n^2 + 2n + 1``.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, SymmetryError

log = logging.getLogger(__name__)

#: above this dimension the w-blocks are not materialized
MAX_EXPLICIT_DIM = 32
#: asymmetry beyond this relative level is rejected outright
SYMMETRY_REJECT_RTOL = 1e-6


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _symmetrized(M: np.ndarray, name: str, rtol: float) -> np.ndarray:
    scale = np.abs(M).max(initial=0.0)
    asym = np.abs(M - M.T).max(initial=0.0)
    if asym > SYMMETRY_REJECT_RTOL * max(scale, 1.0):
        raise SymmetryError(f"{name} is not symmetric (max |M - M^T| = {asym:.3g})")
    if asym > rtol * scale:
        warnings.warn(f"{name} symmetrized (max |M - M^T| = {asym:.3g})", stacklevel=3)
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class QpInstance:
    D: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    alpha: float
    symmetry_rtol: float = field(default=1e-12, repr=False, compare=False)

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float)).ravel()
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).ravel()
        n = c.size
        if n < 1:
            raise DimensionError("dimension must be at least 1")
        for name, M in (("D", D), ("A", A)):
            if M.shape != (n, n):
                raise DimensionError(f"{name} has shape {M.shape}, expected {(n, n)}")
        if b.size != n:
            raise DimensionError(f"b has length {b.size}, expected {n}")
        alpha = float(np.asarray(self.alpha, dtype=float).reshape(()))
        object.__setattr__(self, "D", _frozen(_symmetrized(D, "D", self.symmetry_rtol)))
        object.__setattr__(self, "A", _frozen(_symmetrized(A, "A", self.symmetry_rtol)))
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def param_dim(self) -> int:
        n = self.n
        return 2 * n * n + 2 * n + 1

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.D.ravel(), self.c, self.A.ravel(), self.b, [self.alpha]]
        )

    def objective(self, x) -> float:
        x = self._check_x(x)
        return float(0.5 * x @ self.D @ x + self.c @ x)

    def constraint(self, x) -> float:
        x = self._check_x(x)
        return float(0.5 * x @ self.A @ x + self.b @ x + self.alpha)

    def replace(self, **changes) -> "QpInstance":
        fields = dict(D=self.D, c=self.c, A=self.A, b=self.b, alpha=self.alpha)
        fields.update(changes)
        return QpInstance(**fields)

    def scaled_constraint(self, t: float) -> "QpInstance":
        """Instance with (A, b, alpha) multiplied by ``t``; multipliers scale by 1/t."""
        return self.replace(A=t * self.A, b=t * self.b, alpha=t * self.alpha)

    def is_trs(self, tol: float = 1e-12) -> bool:
        n = self.n
        return (
            np.abs(self.A - np.eye(n)).max() <= tol
            and np.abs(self.b).max(initial=0.0) <= tol
            and self.alpha < 0
        )

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n:
            raise DimensionError(f"point has length {x.size}, expected {self.n}")
        return x


def instance_from_vector(w, n: int) -> QpInstance:
    """Inverse of :meth:`QpInstance.to_vector`."""
    w = np.asarray(w, dtype=float).ravel()
    d = 2 * n * n + 2 * n + 1
    if w.size != d:
        raise DimensionError(f"parameter vector has length {w.size}, expected {d}")
    nn = n * n
    D = w[:nn].reshape(n, n)
    c = w[nn:nn + n]
    A = w[nn + n:2 * nn + n].reshape(n, n)
    b = w[2 * nn + n:2 * nn + 2 * n]
    return QpInstance(D=D, c=c, A=A, b=b, alpha=w[-1])


def param_distance(w1: QpInstance, w2: QpInstance) -> float:
    """Sum norm over blocks: Frobenius on D and A, Euclidean on c and b, |.| on alpha."""
    return float(
        np.linalg.norm(w1.D - w2.D)
        + np.linalg.norm(w1.c - w2.c)
        + np.linalg.norm(w1.A - w2.A)
        + np.linalg.norm(w1.b - w2.b)
        + abs(w1.alpha - w2.alpha)
    )


def evaluate(instance: QpInstance, x):
    """Objective, constraint value and both x-gradients at ``x``."""
    x = instance._check_x(x)
    grad_obj = instance.D @ x + instance.c
    grad_con = instance.A @ x + instance.b
    obj = 0.5 * x @ instance.D @ x + instance.c @ x
    con = 0.5 * x @ instance.A @ x + instance.b @ x + instance.alpha
    return float(obj), float(con), grad_obj, grad_con


@dataclass(frozen=True)
class DerivativeSnapshot:
    """First and second derivatives of objective and constraint at (x_bar, w_bar).

    The w-blocks are ``None`` only for structured QP snapshots above
    ``MAX_EXPLICIT_DIM``; certificate code then relies on the structural
    facts that the mixed Hessian blocks have trivial kernels.
    """

    x_bar: np.ndarray
    grad_f0: np.ndarray
    hess_xx_f0: np.ndarray
    F_value: float
    grad_x_F: np.ndarray
    hess_xx_F: np.ndarray
    hess_wx_f0: np.ndarray | None = None
    grad_w_F: np.ndarray | None = None
    hess_wx_F: np.ndarray | None = None
    qp_structure: bool = False

    def __post_init__(self):
        x = _frozen(np.ravel(self.x_bar))
        n = x.size
        object.__setattr__(self, "x_bar", x)
        for name in ("grad_f0", "grad_x_F"):
            v = _frozen(np.ravel(getattr(self, name)))
            if v.size != n:
                raise DimensionError(f"{name} has length {v.size}, expected {n}")
            object.__setattr__(self, name, v)
        for name in ("hess_xx_f0", "hess_xx_F"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if M.shape != (n, n):
                raise DimensionError(f"{name} has shape {M.shape}, expected {(n, n)}")
            object.__setattr__(self, name, _frozen(_symmetrized(M, name, 1e-12)))
        object.__setattr__(self, "F_value", float(self.F_value))

        blocks = (self.hess_wx_f0, self.grad_w_F, self.hess_wx_F)
        if all(b is None for b in blocks):
            if not self.qp_structure:
                raise DimensionError("w-derivative blocks are required without qp_structure")
            return
        if any(b is None for b in blocks):
            raise DimensionError("hess_wx_f0, grad_w_F and hess_wx_F must be given together")
        Hf = np.atleast_2d(np.asarray(self.hess_wx_f0, dtype=float))
        gF = np.ravel(np.asarray(self.grad_w_F, dtype=float))
        HF = np.atleast_2d(np.asarray(self.hess_wx_F, dtype=float))
        d = gF.size
        if Hf.shape != (d, n) or HF.shape != (d, n):
            raise DimensionError(
                f"w-blocks must be {(d, n)}, got {Hf.shape} and {HF.shape}"
            )
        object.__setattr__(self, "hess_wx_f0", _frozen(Hf))
        object.__setattr__(self, "grad_w_F", _frozen(gF))
        object.__setattr__(self, "hess_wx_F", _frozen(HF))

    @property
    def n(self) -> int:
        return self.x_bar.size

    @property
    def has_w_blocks(self) -> bool:
        return self.hess_wx_f0 is not None


def _block_x_rows(x: np.ndarray) -> np.ndarray:
    """n^2 x n matrix whose rows (i, j), row-major, carry x_j in column i."""
    n = x.size
    out = np.zeros((n * n, n))
    for i in range(n):
        out[i * n:(i + 1) * n, i] = x
    return out


def qp_snapshot(instance: QpInstance, x_bar) -> DerivativeSnapshot:
    """Closed-form derivative snapshot of a QP instance at ``x_bar``."""
    x = instance._check_x(x_bar)
    n = instance.n
    _, F_value, grad_f0, grad_x_F = evaluate(instance, x)
    if n > MAX_EXPLICIT_DIM:
        return DerivativeSnapshot(
            x_bar=x, grad_f0=grad_f0, hess_xx_f0=instance.D, F_value=F_value,
            grad_x_F=grad_x_F, hess_xx_F=instance.A, qp_structure=True,
        )
    m1 = n * n + n            # rows for w1 = (D, c)
    d = instance.param_dim
    X = _block_x_rows(x)

    hess_wx_f0 = np.zeros((d, n))
    hess_wx_f0[: n * n] = X
    hess_wx_f0[n * n: m1] = np.eye(n)

    hess_wx_F = np.zeros((d, n))
    hess_wx_F[m1: m1 + n * n] = X
    hess_wx_F[m1 + n * n: m1 + n * n + n] = np.eye(n)

    grad_w_F = np.zeros(d)
    grad_w_F[m1: m1 + n * n] = 0.5 * np.outer(x, x).ravel()
    grad_w_F[m1 + n * n: m1 + n * n + n] = x
    grad_w_F[-1] = 1.0

    return DerivativeSnapshot(
        x_bar=x, grad_f0=grad_f0, hess_xx_f0=instance.D, F_value=F_value,
        grad_x_F=grad_x_F, hess_xx_F=instance.A, hess_wx_f0=hess_wx_f0,
        grad_w_F=grad_w_F, hess_wx_F=hess_wx_F, qp_structure=True,
    )


# -- JSON --------------------------------------------------------------------

_SNAPSHOT_KEYS = (
    "x_bar", "grad_f0", "hess_xx_f0", "F_value", "grad_x_F", "hess_xx_F",
    "hess_wx_f0", "grad_w_F", "hess_wx_F",
)


def instance_to_dict(instance: QpInstance, x_bar=None) -> dict:
    out = {
        "n": instance.n,
        "D": instance.D.tolist(),
        "c": instance.c.tolist(),
        "A": instance.A.tolist(),
        "b": instance.b.tolist(),
        "alpha": instance.alpha,
    }
    if x_bar is not None:
        out["x_bar"] = np.asarray(x_bar, dtype=float).tolist()
    return out


def instance_from_dict(data: dict):
    """Parse the instance schema; returns ``(instance, x_bar or None)``."""
    missing = [k for k in ("D", "c", "A", "b", "alpha") if k not in data]
    if missing:
        raise DimensionError(f"instance is missing keys: {', '.join(missing)}")
    instance = QpInstance(
        D=data["D"], c=data["c"], A=data["A"], b=data["b"], alpha=data["alpha"]
    )
    if "n" in data and int(data["n"]) != instance.n:
        raise DimensionError(f"n = {data['n']} does not match data of dimension {instance.n}")
    x_bar = data.get("x_bar")
    if x_bar is not None:
        x_bar = instance._check_x(x_bar)
    return instance, x_bar


def snapshot_from_dict(data: dict) -> DerivativeSnapshot:
    missing = [k for k in _SNAPSHOT_KEYS if k not in data]
    if missing:
        raise DimensionError(f"snapshot is missing keys: {', '.join(missing)}")
    return DerivativeSnapshot(**{k: data[k] for k in _SNAPSHOT_KEYS})


def load_json(path) -> dict:
    """Read a JSON document; ``json.JSONDecodeError`` carries line and column."""
    return json.loads(Path(path).read_text(encoding="utf-8"))
