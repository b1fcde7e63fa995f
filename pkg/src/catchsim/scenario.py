"""Throw sampling, noise profiles and the sensor timeline of one throw.

Shared by dataset generation and the episode simulator so both see exactly
the same sensing model.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .ballistics import (GRAVITY, Z_PLANE, ThrowParams, TrueTrajectory, aim_throw, plane_crossing,
                         simulate_throw)
from .sensors import (CameraModel, Detection, Frame, HsvRange, RadarModel, Source, color_filter_localize,
                      radar_filter, radar_scan, render_frame)

HOME = (0.0, 0.4, Z_PLANE)
TICK = 1e-3


@dataclass(frozen=True)
class NoiseProfile:
    name: str = "realistic"
    drag_coeff: float = 0.03
    ideal_camera: bool = False  # exact positions instead of render + localize
    depth_noise_sigma: float = 0.003  # metres at 1 m, grows with depth squared
    radar_sigma: float = 0.03
    clutter: bool = True
    exposure: float = 0.02  # seconds; sets vertical motion-blur length
    brightness: tuple = (0.8, 1.1)

    @classmethod
    def named(cls, name: str) -> "NoiseProfile":
        try:
            return PROFILES[name]
        except KeyError:
            raise ValueError(f"unknown noise profile {name!r}; choose from {sorted(PROFILES)}") from None


PROFILES = {
    "realistic": NoiseProfile(),
    "noiseless": NoiseProfile("noiseless", drag_coeff=0.0, ideal_camera=True, depth_noise_sigma=0.0,
                              radar_sigma=0.0, clutter=False, exposure=0.0, brightness=(1.0, 1.0)),
    "drag-free": NoiseProfile("drag-free", drag_coeff=0.0),
}


@dataclass(frozen=True)
class ThrowDistribution:
    """Throws aimed at a point near the home position, timed around the measured TOF medians."""

    distances: tuple = (5.12, 6.70)
    tof_medians: tuple = (0.974, 1.206)
    speed_jitter: float = 0.10
    aim_jitter: tuple = (0.3, 0.15)
    launch_height: float = 1.5
    launch_jitter: tuple = (0.1, 0.1)
    home: tuple = HOME
    max_travel: float | None = None

    def tof_median(self, distance: float) -> float:
        """Configured median TOF; other distances interpolate linearly (extrapolating at the ends)."""
        for d, t in zip(self.distances, self.tof_medians):
            if abs(d - distance) < 1e-9:
                return t
        if len(self.distances) < 2:
            raise ValueError(f"no TOF median configured for distance {distance}")
        order = np.argsort(self.distances)
        d = np.asarray(self.distances, float)[order]
        t = np.asarray(self.tof_medians, float)[order]
        i = int(np.clip(np.searchsorted(d, distance) - 1, 0, len(d) - 2))
        tof = t[i] + (t[i + 1] - t[i]) * (distance - d[i]) / (d[i + 1] - d[i])
        if tof <= 0:
            raise ValueError(f"distance {distance} extrapolates to a non-positive TOF")
        return float(tof)


@dataclass(frozen=True)
class SensorSuite:
    camera: CameraModel = field(default_factory=CameraModel)
    radar: RadarModel = field(default_factory=RadarModel)
    hsv: HsvRange = field(default_factory=HsvRange)
    object_radius: float = 0.12
    min_pixels: int = 10
    camera_phase: float = 0.0
    radar_phase: float = 0.05


@dataclass
class Throw:
    params: ThrowParams
    trajectory: TrueTrajectory
    t_cross: float
    crossing: np.ndarray
    distance: float
    travel: float


def sample_throw(rng: np.random.Generator, dist: ThrowDistribution = ThrowDistribution(),
                 drag_coeff: float = 0.0, z_plane: float = Z_PLANE, gravity: float = GRAVITY,
                 distance: float | None = None) -> Throw:
    home = np.asarray(dist.home, float)
    if distance is None:
        distance = float(dist.distances[rng.integers(len(dist.distances))])
    tof_med = dist.tof_median(distance)
    for _ in range(10_000):
        s = 1.0 + rng.uniform(-dist.speed_jitter, dist.speed_jitter)
        tof = tof_med / s
        target = home[:2] + rng.uniform(-1, 1, 2) * np.asarray(dist.aim_jitter)
        p0 = (rng.uniform(-1, 1) * dist.launch_jitter[0],
              dist.launch_height + rng.uniform(-1, 1) * dist.launch_jitter[1],
              z_plane + distance)
        travel = float(np.hypot(*(target - home[:2])))
        if dist.max_travel is None or travel <= dist.max_travel:
            break
    else:
        raise RuntimeError("could not sample a throw within max_travel")
    params = aim_throw(p0, target, tof, z_plane=z_plane, gravity=gravity, drag_coeff=drag_coeff)
    # run a little past the plane so the crossing is bracketed
    traj = simulate_throw(params, TICK, z_stop=z_plane - 0.3, floor=False)
    t_cross, point = plane_crossing(traj, z_plane)
    return Throw(params, traj, t_cross, point, distance, travel)


def _ticks(rate: float, phase: float, t_end: float) -> np.ndarray:
    # sensor events snap to the 1 ms simulation tick
    n = int(math.floor((t_end - phase) * rate)) + 1
    ts = np.round((phase + np.arange(max(n, 0)) / rate) / TICK) * TICK
    return ts[ts < t_end]


def _state(traj: TrueTrajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    i = int(round(t / traj.dt))
    return traj.pos[i], traj.vel[i]


def visible_blob(camera: CameraModel, pos, radius: float) -> float:
    """Approximate projected blob area in pixels, 0 when off-image or behind."""
    pc = camera.to_camera(pos)
    if pc[2] <= 0.05:
        return 0.0
    u, v, z = camera.project(pos)
    if not (0 <= u <= camera.width - 1 and 0 <= v <= camera.height - 1):
        return 0.0
    return math.pi * (camera.fx * radius / z) * (camera.fy * radius / z)


def motion_blur_px(camera: CameraModel, pos, vel, exposure: float) -> tuple[int, bool]:
    """Vertical smear length in pixels and whether the trail lies above the object."""
    if exposure <= 0:
        return 0, True
    _, v1, _ = camera.project(pos)
    _, v0, _ = camera.project(np.asarray(pos) - np.asarray(vel) * exposure)
    dv = v1 - v0
    return int(round(abs(dv))), dv >= 0


@dataclass
class Observation:
    camera: list[Detection]
    radar: list[Detection]
    frames: list[Frame] = field(default_factory=list)


FrameLocalizer = Callable[[Sequence[Frame]], list]


def observe_throw(throw: Throw, suite: SensorSuite, profile: NoiseProfile, seed,
                  localizer: FrameLocalizer | None = None, keep_frames: bool = False) -> Observation:
    """Camera and radar detections of one throw, up to the plane crossing.

    ``localizer`` maps rendered frames to positions (or None); the default is
    the colour filter. Frames are only localized when the object is in view.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    cam_ss, radar_ss = ss.spawn(2)
    cam_rng = np.random.default_rng(cam_ss)
    radar_rng = np.random.default_rng(radar_ss)
    traj, t_end = throw.trajectory, throw.t_cross
    camera = replace(suite.camera, depth_noise_sigma=profile.depth_noise_sigma)

    cam_times, frames = [], []
    for t in _ticks(camera.rate, suite.camera_phase, t_end):
        clutter_seed = int(cam_rng.integers(2**63))
        brightness = float(cam_rng.uniform(*profile.brightness))
        pos, vel = _state(traj, t)
        if visible_blob(camera, pos, suite.object_radius) < suite.min_pixels:
            continue
        if profile.ideal_camera:
            cam_times.append((t, pos.copy()))
            continue
        blur, trail_up = motion_blur_px(camera, pos, vel, profile.exposure)
        f = render_frame(pos, suite.object_radius, camera, clutter_seed, timestamp=float(t),
                         hsv_range=suite.hsv, blur_len=blur, brightness=brightness, trail_up=trail_up,
                         n_clutter=None if profile.clutter else 0)
        if f.object_pixels >= 1:
            frames.append(f)

    cam_dets: list[Detection] = [Detection(p, t, Source.CAMERA) for t, p in cam_times]
    if frames:
        if localizer is None:
            found = [color_filter_localize(f, suite.hsv, camera, suite.min_pixels) for f in frames]
        else:
            found = localizer(frames)
        for f, p in zip(frames, found):
            if p is None:
                continue
            p = p.position if isinstance(p, Detection) else p
            cam_dets.append(Detection(p, f.timestamp, Source.CAMERA))

    radar_dets = []
    radar_model = replace(suite.radar, noise_sigma=profile.radar_sigma)
    for t in _ticks(radar_model.rate, suite.radar_phase, t_end):
        pos, vel = _state(traj, t)
        returns = radar_scan(pos, vel, int(radar_rng.integers(2**63)), radar_model.noise_sigma,
                             radar=radar_model, clutter=profile.clutter)
        d = radar_filter(returns, float(t), radar_model.v_static)
        if d is not None:
            radar_dets.append(d)
    return Observation(cam_dets, radar_dets, frames if keep_frames else [])


def profile_dict(profile: NoiseProfile) -> dict:
    return asdict(profile)
