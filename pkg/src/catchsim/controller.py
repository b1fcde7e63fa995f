"""Per-axis velocity controller for the end-effector and the catch judge."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .ballistics import Z_PLANE, TrueTrajectory, plane_crossing
from .baseline_predictor import InterceptionPoint

BASKET_RADIUS = 0.075
CONTROL_RATE = 1000.0
HOME = (0.0, 0.4, Z_PLANE)
WORKSPACE = ((-0.9, -0.2, -0.8), (0.9, 1.4, 0.0))

TRACE_COLUMNS = ("t", "x", "y", "z", "vx", "vy", "vz")


@dataclass
class RobotState:
    position: np.ndarray = field(default_factory=lambda: np.array(HOME, float))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_max: float = 0.9
    a_max: float = 3.0
    gain: float = 8.0
    deadband: float = 0.002
    workspace: tuple = WORKSPACE

    def __post_init__(self):
        self.position = np.array(self.position, float).reshape(3)
        self.velocity = np.array(self.velocity, float).reshape(3)
        lo, hi = (np.asarray(b, float) for b in self.workspace)
        if np.any(lo > hi):
            raise ValueError("workspace lower corner exceeds upper corner")
        if self.v_max <= 0 or self.a_max <= 0 or self.gain <= 0:
            raise ValueError("v_max, a_max and gain must be positive")
        if np.any(self.position < lo) or np.any(self.position > hi):
            raise ValueError("position outside workspace")

    def clamp(self, point) -> tuple[np.ndarray, bool]:
        lo, hi = (np.asarray(b, float) for b in self.workspace)
        p = np.asarray(point, float)
        c = np.clip(p, lo, hi)
        return c, bool(np.any(c != p))

    def advance(self, command, dt: float) -> None:
        """Apply a velocity command for ``dt``; axes that hit the workspace wall stop."""
        lo, hi = (np.asarray(b, float) for b in self.workspace)
        self.velocity = np.asarray(command, float).copy()
        new = self.position + self.velocity * dt
        hit = (new < lo) | (new > hi)
        self.position = np.clip(new, lo, hi)
        self.velocity[hit] = 0.0


def control_step(state: RobotState, goal, dt: float = 1.0 / CONTROL_RATE) -> np.ndarray:
    """Velocity command toward ``goal`` (clamped into the workspace).

    Per axis the desired speed is ``K * error``, capped by ``v_max`` and by the
    speed from which ``a_max`` can still stop at the goal; the change from the
    current velocity is limited to ``a_max * dt``. Inside the deadband the
    desired speed is zero.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    goal, _ = state.clamp(goal)
    err = goal - state.position
    dist = np.abs(err)
    speed = np.minimum(np.minimum(state.gain * dist, state.v_max), np.sqrt(2.0 * state.a_max * dist))
    desired = np.where(dist <= state.deadband, 0.0, np.sign(err) * speed)
    dv = np.clip(desired - state.velocity, -state.a_max * dt, state.a_max * dt)
    return state.velocity + dv


def update_goal(goal, point: InterceptionPoint | None, state: RobotState | None = None) -> tuple[np.ndarray, bool]:
    """Goal for the latest interception point; returns ``(goal, clamped)``.

    ``None`` keeps the current goal. Later calls simply overwrite earlier ones.
    """
    if point is None:
        return np.asarray(goal, float), False
    g = np.array([point.x, point.y, point.z_plane], float)
    if state is None:
        lo, hi = (np.asarray(b, float) for b in WORKSPACE)
        c = np.clip(g, lo, hi)
        return c, bool(np.any(c != g))
    return state.clamp(g)


class RobotTrace:
    """End-effector samples appended once per control tick."""

    def __init__(self):
        self._rows: list[tuple] = []

    def record(self, t: float, state: RobotState) -> None:
        self._rows.append((t, *state.position, *state.velocity))

    def __len__(self):
        return len(self._rows)

    def as_array(self) -> np.ndarray:
        return np.array(self._rows, float).reshape(-1, 7)

    @property
    def t(self):
        return self.as_array()[:, 0]

    @property
    def position(self):
        return self.as_array()[:, 1:4]

    def state_at(self, t: float) -> np.ndarray:
        """Linearly interpolated position at ``t`` (held at the ends)."""
        arr = self.as_array()
        if not len(arr):
            raise ValueError("empty trace")
        return np.array([np.interp(t, arr[:, 0], arr[:, j]) for j in (1, 2, 3)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self._rows:
            w.writerow([f"{v:.9g}" for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            f.write(self.to_csv())


@dataclass(frozen=True)
class CatchOutcome:
    success: bool
    miss_distance: float
    t_cross: float
    ee_at_cross: np.ndarray
    object_at_cross: np.ndarray


def judge(ee_xy, obj_xy, basket_radius: float = BASKET_RADIUS) -> tuple[bool, float]:
    miss = math.hypot(ee_xy[0] - obj_xy[0], ee_xy[1] - obj_xy[1])
    # inclusive rim; the slack absorbs rounding in the subtraction
    return miss <= basket_radius + 1e-12, miss


def evaluate_catch(trace: RobotTrace, trajectory: TrueTrajectory, z_plane: float = Z_PLANE,
                   basket_radius: float = BASKET_RADIUS) -> CatchOutcome:
    t_cross, obj = plane_crossing(trajectory, z_plane)
    ee = trace.state_at(t_cross)
    ok, miss = judge(ee, obj, basket_radius)
    return CatchOutcome(ok, miss, t_cross, ee, np.asarray(obj, float))
