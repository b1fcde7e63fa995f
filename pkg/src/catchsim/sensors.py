"""Simulated RGB-D camera and radar, plus the colour-filter and moving-target
localizers that turn their raw output into detections."""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

# Fixed object colour (RGB) and the HSV window that isolates it.
OBJECT_PINK = (0.95, 0.45, 0.65)
DEPTH_QUANTUM = 1e-3


class Source(IntEnum):
    CAMERA = 0
    RADAR = 1


@dataclass(frozen=True)
class HsvRange:
    h_min: float = 320.0
    h_max: float = 352.0
    s_min: float = 0.3
    s_max: float = 1.0
    v_min: float = 0.35
    v_max: float = 1.0

    def __post_init__(self):
        for lo, hi in ((self.s_min, self.s_max), (self.v_min, self.v_max)):
            if lo > hi:
                raise ValueError("min must not exceed max")
        if not (0 <= self.h_min < 360 and 0 <= self.h_max < 360):
            raise ValueError("hue bounds must lie in [0, 360)")

    def contains(self, h, s, v):
        if self.h_min <= self.h_max:
            h_ok = (h >= self.h_min) & (h <= self.h_max)
        else:  # wraps through 0
            h_ok = (h >= self.h_min) | (h <= self.h_max)
        return (h_ok & (s >= self.s_min) & (s <= self.s_max)
                & (v >= self.v_min) & (v <= self.v_max))


@dataclass(frozen=True)
class CameraModel:
    """Pinhole RGB-D camera looking down +z, optionally pitched up by ``pitch`` rad.

    Pixel (row, col) has its centre at image coordinates (v=row, u=col).
    """

    width: int = 80
    height: int = 60
    fx: float = 80.0
    fy: float = 80.0
    cx: float | None = None
    cy: float | None = None
    position: tuple = (0.0, 0.6, -1.0)
    pitch: float = math.radians(12.0)
    rate: float = 30.0
    depth_noise_sigma: float = 0.0
    blur_len: int = 0
    background_depth: float = 9.0
    antialias: bool = True

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.cx is None:
            object.__setattr__(self, "cx", (self.width - 1) / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", (self.height - 1) / 2.0)

    @property
    def rotation(self) -> np.ndarray:
        """Rows are the camera right, down and forward axes in the robot frame."""
        c, s = math.cos(self.pitch), math.sin(self.pitch)
        return np.array([[1.0, 0.0, 0.0], [0.0, -c, s], [0.0, s, c]])

    def to_camera(self, p) -> np.ndarray:
        return self.rotation @ (np.asarray(p, float) - np.asarray(self.position, float))

    def to_robot(self, pc) -> np.ndarray:
        return self.rotation.T @ np.asarray(pc, float) + np.asarray(self.position, float)

    def project(self, p) -> tuple[float, float, float]:
        """Robot-frame point to (u, v, depth)."""
        xc, yc, zc = self.to_camera(p)
        if zc <= 0:
            raise ValueError("point is behind the camera")
        return self.cx + self.fx * xc / zc, self.cy + self.fy * yc / zc, zc

    def back_project(self, u: float, v: float, depth: float) -> np.ndarray:
        pc = np.array([(u - self.cx) * depth / self.fx, (v - self.cy) * depth / self.fy, depth])
        return self.to_robot(pc)


@dataclass
class Frame:
    data: np.ndarray  # (4, H, W) float32: R, G, B in [0, 1], D in metres
    timestamp: float = 0.0
    object_pixels: int = 0  # ground-truth count of pixels covered by the object

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Detection:
    position: np.ndarray
    t: float
    source: Source = Source.CAMERA

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "source", Source(self.source))
        if self.t < 0:
            raise ValueError("detection time must be non-negative")


class DetectionBuffer:
    """Time-ordered detections from any mix of sources."""

    def __init__(self, detections: Iterable[Detection] = ()):
        self._items: list[Detection] = []
        for d in detections:
            self.append(d)

    def append(self, d: Detection) -> None:
        if self._items and d.t < self._items[-1].t:
            raise ValueError("detections must be appended in time order")
        self._items.append(d)

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return DetectionBuffer(self._items[idx])
        return self._items[idx]

    def to_array(self) -> np.ndarray:
        """(n, 5) array of ``t, x, y, z, source``."""
        if not self._items:
            return np.zeros((0, 5))
        return np.array([[d.t, *d.position, int(d.source)] for d in self._items])

    @classmethod
    def from_array(cls, arr) -> "DetectionBuffer":
        arr = np.asarray(arr, dtype=float).reshape(-1, 5)
        return cls(Detection(row[1:4], float(row[0]), Source(int(row[4]))) for row in arr)


@dataclass(frozen=True)
class RadarReturn:
    position: np.ndarray
    radial_velocity: float


@dataclass(frozen=True)
class RadarModel:
    position: tuple = (0.0, 0.3, -0.6)
    rate: float = 10.0
    noise_sigma: float = 0.03
    v_static: float = 0.2
    n_clutter: tuple = (3, 8)


# -- colour space -------------------------------------------------------------

def rgb_to_hsv(r, g, b):
    """Hexcone RGB -> HSV. Works elementwise on scalars or arrays.

    Hue in degrees [0, 360); grey (r == g == b) maps to hue 0, saturation 0.
    """
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    g = np.clip(np.asarray(g, dtype=float), 0.0, 1.0)
    b = np.clip(np.asarray(b, dtype=float), 0.0, 1.0)
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(mx == r, ((g - b) / safe) % 6.0,
                 np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    h = np.where(delta > 0, 60.0 * h, 0.0) % 360.0
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    if h.ndim == 0:
        return float(h), float(s), float(mx)
    return h, s, mx


# -- camera -------------------------------------------------------------------

def _random_outside_colour(rng, hsv_range: HsvRange) -> np.ndarray:
    # widen the rejected window so blends with pink stay outside it as well
    guard = HsvRange((hsv_range.h_min - 25) % 360, (hsv_range.h_max + 8) % 360,
                     max(hsv_range.s_min - 0.2, 0.0), 1.0, 0.0, 1.0)
    while True:
        c = rng.uniform(0.05, 0.95, size=3)
        if not guard.contains(*rgb_to_hsv(*c)):
            return c


def _coverage(camera: CameraModel, u: float, v: float, ru: float, rv: float, rows: int,
              row0: int) -> np.ndarray:
    """Fraction of each pixel covered by the ellipse; rows start at image row ``row0``."""
    ss = 4 if camera.antialias else 1
    offs = (np.arange(ss) + 0.5) / ss - 0.5 if ss > 1 else np.zeros(1)
    ii = np.arange(row0, row0 + rows)[:, None, None, None] + offs[None, None, :, None]
    jj = np.arange(camera.width)[None, :, None, None] + offs[None, None, None, :]
    inside = ((jj - u) / ru) ** 2 + ((ii - v) / rv) ** 2 <= 1.0
    return inside.mean(axis=(2, 3))


def render_frame(object_pos, object_radius: float, camera: CameraModel, clutter_seed: int, *,
                 timestamp: float = 0.0, hsv_range: HsvRange = HsvRange(),
                 blur_len: int | None = None, brightness: float = 1.0, n_clutter: int | None = None,
                 noise_seed: int | None = None, object_color=OBJECT_PINK,
                 trail_up: bool = True) -> Frame:
    """Synthetic RGB-D frame of the object in front of random clutter.

    Motion blur is a trailing vertical smear: the object image at exposure end
    sits at its projected position and the smear extends ``blur_len`` pixels
    above it (below when ``trail_up`` is false), blending toward the background.
    """
    u, v, depth = camera.project(object_pos)
    blur = camera.blur_len if blur_len is None else int(blur_len)
    H, W = camera.height, camera.width
    rng = np.random.default_rng(clutter_seed)

    bg = _random_outside_colour(rng, hsv_range) * 0.6 + 0.2
    rgb = np.empty((3, H, W))
    rgb[:] = bg[:, None, None]
    dep = np.full((H, W), camera.background_depth)
    k = rng.integers(4, 12) if n_clutter is None else n_clutter
    for _ in range(k):
        h0, w0 = rng.integers(0, H), rng.integers(0, W)
        hh, ww = rng.integers(3, max(4, H // 2)), rng.integers(3, max(4, W // 2))
        rgb[:, h0:h0 + hh, w0:w0 + ww] = _random_outside_colour(rng, hsv_range)[:, None, None]
        dep[h0:h0 + hh, w0:w0 + ww] = rng.uniform(2.0, camera.background_depth)

    ru = camera.fx * object_radius / depth
    rv = camera.fy * object_radius / depth
    alpha = _coverage(camera, u, v, ru, rv, H + 2 * blur, -blur)
    if blur > 0:
        # box filter over the exposure: with the trail above, pixel i saw the
        # object while it was centred on rows i..i+blur (below: i-blur..i)
        c = np.cumsum(np.vstack([np.zeros((1, W)), alpha]), axis=0)
        rows = np.arange(blur, blur + H)
        lo, hi = (rows, rows + blur + 1) if trail_up else (rows - blur, rows + 1)
        alpha = (c[hi] - c[lo]) / (blur + 1)
    else:
        alpha = alpha[blur:blur + H]

    colour = np.asarray(object_color, float)[:, None, None]
    rgb = alpha[None] * colour + (1 - alpha[None]) * rgb
    rgb = np.clip(rgb * brightness, 0.0, 1.0)
    dep = np.where(alpha >= 0.5, depth, dep)
    if camera.depth_noise_sigma > 0:
        nrng = np.random.default_rng(clutter_seed if noise_seed is None else noise_seed)
        dep = dep + nrng.normal(0.0, 1.0, dep.shape) * camera.depth_noise_sigma * dep**2
    dep = np.maximum(np.round(dep / DEPTH_QUANTUM) * DEPTH_QUANTUM, 0.0)

    data = np.concatenate([rgb, dep[None]]).astype(np.float32)
    return Frame(data=data, timestamp=timestamp, object_pixels=int(np.count_nonzero(alpha >= 0.5)))


def color_filter_localize(frame: Frame, hsv_range: HsvRange, camera: CameraModel,
                          min_pixels: int = 10) -> Detection | None:
    """Median of the in-range pixel residue, back-projected to the robot frame."""
    h, s, v = rgb_to_hsv(frame.data[0], frame.data[1], frame.data[2])
    rows, cols = np.nonzero(hsv_range.contains(h, s, v))
    if len(rows) < min_pixels:
        return None
    depth = float(np.median(frame.data[3, rows, cols].astype(float)))
    pos = camera.back_project(float(np.median(cols)), float(np.median(rows)), depth)
    return Detection(pos, frame.timestamp, Source.CAMERA)


# -- radar ---------------------------------------------------------------------

def _radial_velocity(pos, vel, radar_pos) -> float:
    los = np.asarray(pos, float) - np.asarray(radar_pos, float)
    n = np.linalg.norm(los)
    return float(np.dot(vel, los) / n) if n > 0 else 0.0


def radar_scan(object_pos, object_vel, clutter_seed: int, noise_sigma: float, *,
               radar: RadarModel = RadarModel(), clutter: bool = True) -> list[RadarReturn]:
    """One radar sweep: the object, static clutter and 0-2 receding distractors."""
    rng = np.random.default_rng(clutter_seed)
    pos = np.asarray(object_pos, float) + rng.normal(0.0, 1.0, 3) * noise_sigma
    returns = [RadarReturn(pos, _radial_velocity(object_pos, object_vel, radar.position))]
    if not clutter:
        return returns
    lo, hi = radar.n_clutter
    for _ in range(rng.integers(lo, hi + 1)):
        p = rng.uniform([-3.0, 0.0, 0.5], [3.0, 2.5, 9.0])
        returns.append(RadarReturn(p, 0.0))
    for _ in range(rng.integers(0, 3)):
        p = rng.uniform([-3.0, 0.0, 0.5], [3.0, 2.5, 9.0])
        returns.append(RadarReturn(p, float(rng.uniform(0.5, 6.0))))
    order = rng.permutation(len(returns))
    return [returns[i] for i in order]


def radar_filter(returns: Sequence[RadarReturn], t: float, v_static: float = 0.2) -> Detection | None:
    """Drop static and receding targets, keep the fastest approaching one."""
    best = None
    for r in returns:
        if r.radial_velocity >= 0 or abs(r.radial_velocity) < v_static:
            continue
        if best is None or abs(r.radial_velocity) > abs(best.radial_velocity):
            best = r
    if best is None:
        return None
    return Detection(best.position, t, Source.RADAR)


def merge_streams(camera: Sequence[Detection], radar: Sequence[Detection]) -> DetectionBuffer:
    """Stable merge by time; camera detections come first on ties."""
    for name, stream in (("camera", camera), ("radar", radar)):
        ts = [d.t for d in stream]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"{name} stream is not time-ordered")
    return DetectionBuffer(heapq.merge(camera, radar, key=lambda d: d.t))


# -- CSV -----------------------------------------------------------------------

DETECTION_COLUMNS = ("t", "x", "y", "z", "source")


def _g9(x) -> str:
    return f"{float(x):.9g}"


def detections_to_csv(detections: Iterable[Detection]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DETECTION_COLUMNS)
    for d in detections:
        w.writerow([_g9(d.t), *(_g9(c) for c in d.position), int(d.source)])
    return buf.getvalue()


def write_detections_csv(path, detections: Iterable[Detection]) -> None:
    with open(path, "w", newline="") as f:
        f.write(detections_to_csv(detections))


def read_detections_csv(path) -> DetectionBuffer:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return DetectionBuffer(
        Detection([float(r["x"]), float(r["y"]), float(r["z"])], float(r["t"]), Source(int(r["source"])))
        for r in rows)
