"""Ground-truth flight physics in the robot frame.

Axes: x horizontal, y vertical (up), z depth. The robot sits near the
origin and throws arrive from positive z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81
Z_PLANE = -0.4
MAX_FLIGHT_TIME = 10.0


class UnreachableError(ValueError):
    """The throw never reaches the requested depth."""


def vec3(x, y=None, z=None) -> np.ndarray:
    if y is None:
        out = np.asarray(x, dtype=float).reshape(3)
    else:
        out = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite vector {out}")
    return out


@dataclass(frozen=True)
class ThrowParams:
    p0: np.ndarray
    v0: np.ndarray
    gravity: float = GRAVITY
    drag_coeff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p0", vec3(self.p0))
        object.__setattr__(self, "v0", vec3(self.v0))
        if not self.gravity > 0:
            raise ValueError("gravity must be positive")
        if not self.drag_coeff >= 0:
            raise ValueError("drag_coeff must be non-negative")


@dataclass
class TrueTrajectory:
    t: np.ndarray  # (n,)
    pos: np.ndarray  # (n, 3)
    vel: np.ndarray  # (n, 3)
    dt: float
    params: ThrowParams | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.t)

    def state_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity at ``t`` by cubic Hermite interpolation."""
        if t < self.t[0] or t > self.t[-1]:
            raise ValueError(f"t={t} outside trajectory [{self.t[0]}, {self.t[-1]}]")
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        i = min(max(i, 0), len(self.t) - 2)
        return _hermite(self.t[i], self.t[i + 1], self.pos[i], self.pos[i + 1],
                        self.vel[i], self.vel[i + 1], t)


def _hermite(t0, t1, p0, p1, v0, v1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    pos = h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1
    vel = (1 - s) * v0 + s * v1
    return pos, vel


def analytic_state(params: ThrowParams, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form drag-free state at time ``t``."""
    if params.drag_coeff != 0:
        raise ValueError("closed form only valid without drag")
    if t < 0:
        raise ValueError("t must be non-negative")
    g = params.gravity
    pos = params.p0 + params.v0 * t + np.array([0.0, -0.5 * g * t * t, 0.0])
    vel = params.v0 + np.array([0.0, -g * t, 0.0])
    return pos, vel


def _accel(vx, vy, vz, g, k):
    if k == 0.0:
        return 0.0, -g, 0.0
    speed = math.sqrt(vx * vx + vy * vy + vz * vz)
    return -k * speed * vx, -g - k * speed * vy, -k * speed * vz


def _rk4_step(s, dt, g, k):
    # s = [x, y, z, vx, vy, vz]; plain floats are much faster than numpy for 3-vectors
    x, y, z, vx, vy, vz = s
    a1 = _accel(vx, vy, vz, g, k)
    h = 0.5 * dt
    v2 = (vx + h * a1[0], vy + h * a1[1], vz + h * a1[2])
    a2 = _accel(*v2, g, k)
    v3 = (vx + h * a2[0], vy + h * a2[1], vz + h * a2[2])
    a3 = _accel(*v3, g, k)
    v4 = (vx + dt * a3[0], vy + dt * a3[1], vz + dt * a3[2])
    a4 = _accel(*v4, g, k)
    d6 = dt / 6.0
    return (
        x + d6 * (vx + 2 * v2[0] + 2 * v3[0] + v4[0]),
        y + d6 * (vy + 2 * v2[1] + 2 * v3[1] + v4[1]),
        z + d6 * (vz + 2 * v2[2] + 2 * v3[2] + v4[2]),
        vx + d6 * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0]),
        vy + d6 * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1]),
        vz + d6 * (a1[2] + 2 * a2[2] + 2 * a3[2] + a4[2]),
    )


def simulate_throw(params: ThrowParams, dt: float = 1e-3, z_stop: float = Z_PLANE,
                   floor: bool = True) -> TrueTrajectory:
    """Integrate a throw with fixed-step RK4 until it reaches ``z_stop`` or the floor.

    The last sample is interpolated onto the exact stop condition, so its
    spacing from the previous one is at most ``dt``.
    """
    if not 0 < dt <= 0.01:
        raise ValueError(f"dt must be in (0, 0.01], got {dt}")
    if not z_stop < params.p0[2]:
        raise ValueError("z_stop must lie below the launch depth")
    if params.v0[2] >= 0:
        # drag cannot reverse depth motion, so the object never gets closer
        raise UnreachableError("unreachable: no depth motion toward z_stop")

    g, k = params.gravity, params.drag_coeff
    state = (*params.p0, *params.v0)
    rows = [state]
    n_max = int(math.ceil(MAX_FLIGHT_TIME / dt))
    stopped = False
    for _ in range(n_max):
        nxt = _rk4_step(state, dt, g, k)
        hit_plane = nxt[2] <= z_stop
        hit_floor = floor and nxt[1] <= 0.0
        if hit_plane or hit_floor:
            # fraction of the step at which each stop condition is met
            fracs = []
            if hit_plane:
                fracs.append(((state[2] - z_stop) / (state[2] - nxt[2]), 2, z_stop))
            if hit_floor:
                fracs.append((state[1] / (state[1] - nxt[1]) if state[1] > 0 else 0.0, 1, 0.0))
            rows.append(min(fracs))
            stopped = True
            break
        rows.append(nxt)
        state = nxt
    if not stopped:
        raise UnreachableError(f"unreachable: z_stop not reached within {MAX_FLIGHT_TIME} s")

    frac, axis, value = rows.pop()
    arr = np.array(rows, dtype=float)
    t = np.arange(len(arr)) * dt
    pos, vel = arr[:, :3], arr[:, 3:]
    t_end = t[-1] + frac * dt
    p_end, v_end = _hermite(t[-1], t[-1] + dt, pos[-1], np.array(nxt[:3]), vel[-1],
                            np.array(nxt[3:]), t_end)
    p_end[axis] = value
    if frac > 0:
        t = np.append(t, t_end)
        pos = np.vstack([pos, p_end])
        vel = np.vstack([vel, v_end])
    return TrueTrajectory(t=t, pos=pos, vel=vel, dt=dt, params=params)


def plane_crossing(trajectory: TrueTrajectory, z_plane: float = Z_PLANE) -> tuple[float, np.ndarray]:
    """Time and position where the trajectory first reaches depth ``z_plane``.

    The crossing time comes from linear interpolation of depth between the
    bracketing samples; the point is evaluated with the cubic Hermite
    interpolant, which reduces to the linear one for constant velocity.
    """
    z = trajectory.pos[:, 2]
    below = np.nonzero(z <= z_plane)[0]
    if len(below) == 0 or (below[0] == 0 and z[0] < z_plane):
        raise ValueError(f"trajectory never crosses z={z_plane}")
    j = int(below[0])
    if j == 0:
        return float(trajectory.t[0]), trajectory.pos[0].copy()
    i = j - 1
    frac = (z[i] - z_plane) / (z[i] - z[j])
    t_cross = trajectory.t[i] + frac * (trajectory.t[j] - trajectory.t[i])
    if frac == 1.0:
        return float(trajectory.t[j]), trajectory.pos[j].copy()
    point, _ = _hermite(trajectory.t[i], trajectory.t[j], trajectory.pos[i], trajectory.pos[j],
                        trajectory.vel[i], trajectory.vel[j], t_cross)
    point[2] = z_plane
    return float(t_cross), point


def calibrate_throw(distance: float, target_tof: float, apex_height: float | None = None, *,
                    launch_xy: tuple[float, float] = (0.0, 1.5), z_plane: float = Z_PLANE,
                    gravity: float = GRAVITY) -> ThrowParams:
    """Drag-free throw covering ``distance`` of depth in ``target_tof`` seconds.

    ``apex_height`` is the rise of the apex above the launch height. ``None``
    gives the symmetric throw that is back at launch height when it reaches
    the plane.
    """
    if not distance > 0 or not target_tof > 0:
        raise ValueError("distance and target_tof must be positive")
    if apex_height is None:
        vy = 0.5 * gravity * target_tof
    elif apex_height < 0:
        raise ValueError(f"infeasible apex height {apex_height}")
    else:
        vy = math.sqrt(2.0 * gravity * apex_height)
    p0 = (launch_xy[0], launch_xy[1], z_plane + distance)
    v0 = (0.0, vy, -distance / target_tof)
    return ThrowParams(p0=p0, v0=v0, gravity=gravity, drag_coeff=0.0)


def _state_at_time(params: ThrowParams, T: float, dt: float) -> tuple:
    n = int(round(T / dt))
    h = T / n
    s = (*params.p0, *params.v0)
    for _ in range(n):
        s = _rk4_step(s, h, params.gravity, params.drag_coeff)
    return s


def aim_throw(p0, target_xy, tof: float, *, z_plane: float = Z_PLANE, gravity: float = GRAVITY,
              drag_coeff: float = 0.0, dt: float = 5e-3, tol: float = 1e-9,
              max_iter: int = 60) -> ThrowParams:
    """Launch velocity that carries the object from ``p0`` to ``target_xy`` on the
    catch plane after exactly ``tof`` seconds, including drag.

    Shooting with the drag-free sensitivity (``tof`` times identity) as a fixed
    Jacobian; drag is a small perturbation so this contracts quickly.
    """
    p0 = vec3(p0)
    target = np.array([target_xy[0], target_xy[1], z_plane])
    g_vec = np.array([0.0, -0.5 * gravity * tof * tof, 0.0])
    v0 = (target - p0 - g_vec) / tof
    params = ThrowParams(p0, v0, gravity, drag_coeff)
    if drag_coeff == 0:
        return params
    for _ in range(max_iter):
        s = _state_at_time(params, tof, dt)
        err = target - np.array(s[:3])
        if np.max(np.abs(err)) < tol:
            return params
        params = ThrowParams(p0, params.v0 + err / tof, gravity, drag_coeff)
    raise UnreachableError("aim_throw did not converge")
