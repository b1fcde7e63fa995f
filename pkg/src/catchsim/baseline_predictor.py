"""Ballistic least-squares interception predictor.

Each axis is fitted independently over all detections. Horizontal and depth
motion are straight lines in time; the vertical axis carries the fixed
gravity term, so only its offset and initial rate are regressed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ballistics import GRAVITY, Z_PLANE
from .sensors import DetectionBuffer


class PredictionSource(str, Enum):
    BALLISTIC = "ballistic"
    NETWORK = "network"


class NoPredictionError(ValueError):
    """The fit cannot produce an interception point (object receding or plane passed)."""


@dataclass(frozen=True)
class TrajectoryEstimate:
    x_coeffs: tuple[float, float]
    y_coeffs: tuple[float, ...]  # (a, b) pinned gravity, (a, b, c) free quadratic
    z_coeffs: tuple[float, float]
    t0: float
    n_points: int
    gravity: float = GRAVITY
    last_tau: float = 0.0
    fit_mode: str = "pinned_gravity"

    def position(self, tau: float) -> np.ndarray:
        ax, bx = self.x_coeffs
        az, bz = self.z_coeffs
        return np.array([ax + bx * tau, self._y(tau), az + bz * tau])

    def _y(self, tau):
        if self.fit_mode == "free_quadratic":
            a, b, c = self.y_coeffs
            return a + b * tau + c * tau * tau
        a, b = self.y_coeffs
        return a + b * tau - 0.5 * self.gravity * tau * tau


@dataclass(frozen=True)
class InterceptionPoint:
    x: float
    y: float
    z_plane: float
    t_cross: float | None
    source: PredictionSource = PredictionSource.BALLISTIC

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _line_fit(tau: np.ndarray, values: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    # weighted normal equations for value = a + b*tau, closed-form 2x2 inverse
    s0 = w.sum()
    s1 = (w * tau).sum()
    s2 = (w * tau * tau).sum()
    r0 = (w * values).sum()
    r1 = (w * tau * values).sum()
    det = s0 * s2 - s1 * s1
    if det <= 1e-12 * max(s0 * s2, 1e-300):
        raise np.linalg.LinAlgError("rank-deficient design: detections share a single timestamp")
    a = (s2 * r0 - s1 * r1) / det
    b = (s0 * r1 - s1 * r0) / det
    return float(a), float(b)


def fit_trajectory(buffer: DetectionBuffer | np.ndarray, gravity: float = GRAVITY,
                   fit_mode: str = "pinned_gravity", weights: dict | None = None) -> TrajectoryEstimate:
    """Least-squares ballistic fit over every detection in ``buffer``.

    ``buffer`` may also be an (n, 5) array of ``t, x, y, z, source`` rows.
    ``weights`` maps source code to a regression weight (default 1 for both).
    """
    arr = buffer.to_array() if isinstance(buffer, DetectionBuffer) else np.asarray(buffer, float)
    if len(arr) < 3:
        raise ValueError(f"need at least 3 detections, got {len(arr)}")
    t0 = float(arr[0, 0])
    tau = arr[:, 0] - t0
    if weights:
        w = np.array([weights.get(int(s), 1.0) for s in arr[:, 4]], dtype=float)
    else:
        w = np.ones(len(arr))
    x_c = _line_fit(tau, arr[:, 1], w)
    z_c = _line_fit(tau, arr[:, 3], w)
    if fit_mode == "pinned_gravity":
        y_c = _line_fit(tau, arr[:, 2] + 0.5 * gravity * tau * tau, w)
    elif fit_mode == "free_quadratic":
        sw = np.sqrt(w)
        A = np.column_stack([np.ones_like(tau), tau, tau * tau]) * sw[:, None]
        if np.linalg.matrix_rank(A) < 3:
            raise np.linalg.LinAlgError("rank-deficient design for a free quadratic")
        y_c = tuple(float(c) for c in np.linalg.lstsq(A, arr[:, 2] * sw, rcond=None)[0])
    else:
        raise ValueError(f"unknown fit_mode {fit_mode!r}")
    return TrajectoryEstimate(x_c, y_c, z_c, t0, len(arr), gravity, float(tau[-1]), fit_mode)


def predict_interception(estimate: TrajectoryEstimate, z_plane: float = Z_PLANE) -> InterceptionPoint:
    """Solve the fitted depth line for the plane and evaluate x, y there."""
    a_z, b_z = estimate.z_coeffs
    if b_z >= 0:
        raise NoPredictionError("object is not approaching the plane")
    tau = (z_plane - a_z) / b_z
    if tau < estimate.last_tau:
        raise NoPredictionError("plane already passed")
    p = estimate.position(tau)
    return InterceptionPoint(float(p[0]), float(p[1]), z_plane, estimate.t0 + tau, PredictionSource.BALLISTIC)


def ballistic_interception(buffer, z_plane: float = Z_PLANE, gravity: float = GRAVITY,
                           **fit_kwargs) -> InterceptionPoint:
    return predict_interception(fit_trajectory(buffer, gravity, **fit_kwargs), z_plane)
