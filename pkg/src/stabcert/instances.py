"""Small reference instances with known stationary points.

Both live on the unit ball ``0.5|x|^2 - 0.5 <= 0`` with a concave
objective; the 3-D one has a whole circle of degenerate stationary points.
"""
from __future__ import annotations

import numpy as np

from .model import QpInstance

ROOT63_8 = np.sqrt(63.0) / 8.0


def saddle_2d(alpha: float = -0.5) -> QpInstance:
    return QpInstance(
        D=np.diag([0.0, -8.0]), c=[1.0, 0.0], A=np.eye(2), b=np.zeros(2), alpha=alpha
    )


def saddle_2d_points() -> dict[str, np.ndarray]:
    """Boundary stationary points of :func:`saddle_2d` with their multipliers 8, 8, 1."""
    return {
        "upper": np.array([-1.0 / 8.0, ROOT63_8]),
        "lower": np.array([-1.0 / 8.0, -ROOT63_8]),
        "pole": np.array([-1.0, 0.0]),
    }


def saddle_3d(alpha: float = -0.5) -> QpInstance:
    return QpInstance(
        D=np.diag([0.0, -8.0, -8.0]), c=[1.0, 0.0, 0.0], A=np.eye(3), b=np.zeros(3),
        alpha=alpha,
    )


def saddle_3d_pole() -> np.ndarray:
    return np.array([-1.0, 0.0, 0.0])


def saddle_3d_circle_point(t: float) -> np.ndarray:
    """Point of the degenerate circle (multiplier 8) at angle ``t``."""
    return np.array([-1.0 / 8.0, ROOT63_8 * np.sin(t), ROOT63_8 * np.cos(t)])
