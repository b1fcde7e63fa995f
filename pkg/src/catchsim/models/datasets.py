"""Synthetic training data for both networks, plus CSV/JSON persistence.

Every sample draws from its own ``SeedSequence(seed, spawn_key=(split, index, ...))``
so generation is order-independent and can be spread over processes.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ..ballistics import GRAVITY, Z_PLANE
from ..baseline_predictor import NoPredictionError, ballistic_interception
from ..scenario import (NoiseProfile, SensorSuite, ThrowDistribution, motion_blur_px, observe_throw, profile_dict,
                        sample_throw, visible_blob)
from ..sensors import (CameraModel, Detection, DetectionBuffer, Source, detections_to_csv, merge_streams,
                       read_detections_csv, render_frame)
from .features import WINDOW, snapshot_windows


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


_SPLIT_KEY = {Split.TRAIN: 0, Split.VAL: 1, Split.TEST: 2}
TRAJECTORY_SPLITS = {Split.TRAIN: 379, Split.VAL: 40, Split.TEST: 40}
LOCALIZER_SPLITS = {Split.TRAIN: 5437, Split.VAL: 376, Split.TEST: 483}


class LabelSource(str, Enum):
    TRUTH = "truth"
    BASELINE = "baseline"


# -- trajectories ----------------------------------------------------------------

@dataclass
class TrajectorySample:
    detections: np.ndarray  # (n, 5): t, x, y, z, source
    label: np.ndarray  # (2,) crossing x, y
    t_cross: float
    seed_key: tuple = ()

    def buffer(self) -> DetectionBuffer:
        return DetectionBuffer.from_array(self.detections)


@dataclass
class TrajectoryDataset:
    samples: list
    split: Split = Split.TRAIN
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def snapshots(self, min_points: int = 3, window: int = WINDOW, full_only: bool = False):
        """Packed windows for every detection prefix, each paired with its trajectory's label.

        ``full_only`` keeps only prefixes with at least ``window`` detections.
        """
        xs, ys = [], []
        for s in self.samples:
            w = snapshot_windows(s.detections, max(min_points, window if full_only else 0), window)
            xs.append(w)
            ys.append(np.repeat(np.asarray(s.label, np.float32)[None], len(w), axis=0))
        if not xs:
            return np.zeros((0, window, 5), np.float32), np.zeros((0, 2), np.float32)
        return np.concatenate(xs), np.concatenate(ys)


def _throw_sample(seed: int, key: tuple, profile: NoiseProfile, dist: ThrowDistribution, suite: SensorSuite,
                  label_source: LabelSource, z_plane: float, gravity: float, min_points: int,
                  max_attempts: int = 50) -> TrajectorySample:
    for attempt in range(max_attempts):
        ss = np.random.SeedSequence(seed, spawn_key=key + (attempt,))
        throw_ss, obs_ss = ss.spawn(2)
        throw = sample_throw(np.random.default_rng(throw_ss), dist, profile.drag_coeff, z_plane, gravity)
        obs = observe_throw(throw, suite, profile, obs_ss)
        buf = merge_streams(obs.camera, obs.radar)
        if len(buf) < min_points:
            continue
        arr = buf.to_array()
        if label_source is LabelSource.BASELINE:
            try:
                label = ballistic_interception(arr, z_plane, gravity).xy
            except (NoPredictionError, np.linalg.LinAlgError):
                continue
        else:
            label = throw.crossing[:2]
        return TrajectorySample(arr, np.array(label, float), float(throw.t_cross), key + (attempt,))
    raise RuntimeError(f"no usable throw after {max_attempts} attempts for sample {key}")


def _map(fn, args, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, *zip(*args), chunksize=8))


def gen_trajectory_data(n_throws: int, profile: NoiseProfile = NoiseProfile(), seed: int = 0, *,
                        split: Split | str = Split.TRAIN, dist: ThrowDistribution = ThrowDistribution(),
                        suite: SensorSuite = SensorSuite(), label_source: LabelSource | str = LabelSource.TRUTH,
                        z_plane: float = Z_PLANE, gravity: float = GRAVITY, min_points: int = 3,
                        n_jobs: int | None = None) -> TrajectoryDataset:
    """Simulated throws observed by both sensors, labelled with their plane crossing."""
    if n_throws <= 0:
        raise ValueError("n_throws must be positive")
    split, label_source = Split(split), LabelSource(label_source)
    args = [(seed, (_SPLIT_KEY[split], i), profile, dist, suite, label_source, z_plane, gravity, min_points)
            for i in range(n_throws)]
    samples = _map(_throw_sample, args, n_jobs)
    meta = {"seed": seed, "noise_profile": profile_dict(profile), "label_source": label_source.value,
            "z_plane": z_plane, "gravity": gravity}
    return TrajectoryDataset(samples, split, meta)


def gen_trajectory_splits(sizes=None, profile: NoiseProfile = NoiseProfile(), seed: int = 0,
                          **kwargs) -> dict:
    sizes = TRAJECTORY_SPLITS if sizes is None else {Split(k): v for k, v in sizes.items()}
    return {s: gen_trajectory_data(n, profile, seed, split=s, **kwargs) for s, n in sizes.items() if n > 0}


def augment_trajectories(dataset: TrajectoryDataset, factor: int = 5, shift_range: float = 0.4,
                         seed: int = 0) -> TrajectoryDataset:
    """Original samples plus ``factor - 1`` copies each, rigidly shifted in x and y."""
    if factor < 1:
        raise ValueError("factor must be at least 1")
    rng = np.random.default_rng(seed)
    out = []
    for s in dataset.samples:
        out.append(s)
        for _ in range(factor - 1):
            d = rng.uniform(-shift_range, shift_range, 2)
            det = s.detections.copy()
            det[:, 1:3] += d
            out.append(replace(s, detections=det, label=s.label + d))
    meta = dict(dataset.meta, augment={"factor": factor, "shift_range": shift_range, "seed": seed})
    return TrajectoryDataset(out, dataset.split, meta)


def save_trajectory_dataset(path, datasets: dict) -> Path:
    """One detection CSV per trajectory under ``<split>/`` and a ``manifest.json``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"kind": "trajectory", "splits": {}}
    for split, ds in datasets.items():
        split = Split(split)
        (root / split.value).mkdir(exist_ok=True)
        items = []
        for i, s in enumerate(ds.samples):
            name = f"{split.value}/traj_{i:05d}.csv"
            buf = DetectionBuffer.from_array(s.detections)
            (root / name).write_bytes(detections_to_csv(buf).encode())
            items.append({"file": name, "label": [float(v) for v in s.label], "t_cross": s.t_cross,
                          "seed_key": list(s.seed_key)})
        manifest["splits"][split.value] = {"n": len(items), "items": items}
        manifest.update({k: v for k, v in ds.meta.items() if k not in manifest})
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return root


def load_trajectory_dataset(path) -> dict:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    meta = {k: v for k, v in manifest.items() if k not in ("kind", "splits")}
    out = {}
    for name, entry in manifest["splits"].items():
        samples = [TrajectorySample(read_detections_csv(root / it["file"]).to_array(), np.array(it["label"]),
                                    it["t_cross"], tuple(it["seed_key"])) for it in entry["items"]]
        out[Split(name)] = TrajectoryDataset(samples, Split(name), dict(meta))
    return out


# -- localizer frames -------------------------------------------------------------

@dataclass
class LocalizerDataset:
    frames: np.ndarray  # (n, 4, H, W) float32
    labels: np.ndarray  # (n, 3) true object position
    blur: np.ndarray  # (n,) smear length in pixels
    split: Split = Split.TRAIN
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)


def _localizer_throw(seed: int, key: tuple, k: int, suite: SensorSuite, profile: NoiseProfile,
                     dist: ThrowDistribution, blur_range, blur_prob: float, clean_prob: float,
                     z_plane: float, gravity: float):
    """``k`` frames of one simulated throw, each with fresh clutter and lighting."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
    throw = sample_throw(rng, dist, profile.drag_coeff, z_plane, gravity)
    camera = replace(suite.camera, depth_noise_sigma=profile.depth_noise_sigma)
    traj = throw.trajectory
    ticks = [t for t in np.arange(0.0, throw.t_cross, 1.0 / camera.rate)
             if visible_blob(camera, traj.pos[int(round(t / traj.dt))], suite.object_radius) >= suite.min_pixels]
    if not ticks:
        return []
    rows = []
    for t in rng.choice(ticks, size=k, replace=len(ticks) < k):
        i = int(round(t / traj.dt))
        pos, vel = traj.pos[i], traj.vel[i]
        blur, trail_up = motion_blur_px(camera, pos, vel, profile.exposure)
        u = rng.random()
        if u < clean_prob:
            blur = 0
        elif u < clean_prob + blur_prob:
            blur = int(rng.integers(blur_range[0], blur_range[1] + 1))
        frame = render_frame(pos, suite.object_radius, camera, int(rng.integers(2**63)), blur_len=blur,
                             trail_up=trail_up, brightness=float(rng.uniform(*profile.brightness)),
                             hsv_range=suite.hsv)
        rows.append((frame.data, pos.copy(), blur))
    return rows


def gen_localizer_data(n: int, camera: CameraModel | None = None, seed: int = 0, *,
                       split: Split | str = Split.TRAIN, profile: NoiseProfile = NoiseProfile(),
                       dist: ThrowDistribution = ThrowDistribution(), suite: SensorSuite = SensorSuite(),
                       blur_range=(0, 20), blur_prob: float = 0.4, clean_prob: float = 0.2,
                       frames_per_throw: int = 6,
                       z_plane: float = Z_PLANE, gravity: float = GRAVITY,
                       n_jobs: int | None = None) -> LocalizerDataset:
    """Rendered frames of simulated throws, labelled with the true object position.

    Frames are drawn from the camera ticks where the object is in view, a few
    per throw, each over fresh clutter with random brightness. A fraction
    ``clean_prob`` is rendered without blur and a further ``blur_prob``
    replaces the natural smear with a random length from ``blur_range``;
    the rest keep the natural smear. The label is always the position at
    exposure end.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if clean_prob < 0 or blur_prob < 0 or clean_prob + blur_prob > 1:
        raise ValueError("clean_prob and blur_prob must be non-negative and sum to at most 1")
    if camera is not None:
        suite = replace(suite, camera=camera)
    split = Split(split)
    n_throws = -(-n // frames_per_throw)
    rows = []
    j = 0
    while len(rows) < n:
        args = [(seed, (_SPLIT_KEY[split], i), frames_per_throw, suite, profile, dist, blur_range, blur_prob,
                 clean_prob, z_plane, gravity) for i in range(j, j + n_throws)]
        for chunk in _map(_localizer_throw, args, n_jobs):
            rows.extend(chunk)
        j += n_throws
        n_throws = max(1, -(-(n - len(rows)) // frames_per_throw))
    rows = rows[:n]
    frames = np.stack([r[0] for r in rows])
    labels = np.array([r[1] for r in rows])
    blur = np.array([r[2] for r in rows], dtype=int)
    cam = suite.camera
    meta = {"seed": seed, "camera": {"width": cam.width, "height": cam.height, "fx": cam.fx, "fy": cam.fy},
            "noise_profile": profile_dict(profile), "object_radius": suite.object_radius,
            "blur_range": list(blur_range), "blur_prob": blur_prob,
            "clean_prob": clean_prob, "frames_per_throw": frames_per_throw}
    return LocalizerDataset(frames, labels, blur, split, meta)


def gen_localizer_splits(scale: float = 1.0, camera: CameraModel | None = None, seed: int = 0,
                         **kwargs) -> dict:
    """Splits sized like the reference set times ``scale`` (at least one frame each)."""
    return {s: gen_localizer_data(max(1, round(n * scale)), camera, seed, split=s, **kwargs)
            for s, n in LOCALIZER_SPLITS.items()}


def save_localizer_dataset(path, datasets: dict) -> Path:
    """Frames as ``<split>_frames.npy``; labels as detection CSVs; a ``manifest.json``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"kind": "localizer", "splits": {}}
    for split, ds in datasets.items():
        split = Split(split)
        np.save(root / f"{split.value}_frames.npy", ds.frames)
        dets = [Detection(p, 0.0, Source.CAMERA) for p in ds.labels]
        (root / f"{split.value}_labels.csv").write_bytes(detections_to_csv(dets).encode())
        manifest["splits"][split.value] = {"n": len(ds), "frames": f"{split.value}_frames.npy",
                                           "labels": f"{split.value}_labels.csv", "blur": ds.blur.tolist()}
        manifest.update({k: v for k, v in ds.meta.items() if k not in manifest})
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return root


def load_localizer_dataset(path) -> dict:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    meta = {k: v for k, v in manifest.items() if k not in ("kind", "splits")}
    out = {}
    for name, entry in manifest["splits"].items():
        frames = np.load(root / entry["frames"])
        labels = read_detections_csv(root / entry["labels"]).to_array()[:, 1:4]
        out[Split(name)] = LocalizerDataset(frames, labels, np.array(entry["blur"], int), Split(name), dict(meta))
    return out
