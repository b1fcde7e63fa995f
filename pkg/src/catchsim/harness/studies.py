"""TOF table, blur study and the paired four-way pipeline comparison."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..models.datasets import gen_localizer_data
from ..nn import Network
from ..scenario import NoiseProfile, SensorSuite, ThrowDistribution, sample_throw
from ..sensors import Frame, color_filter_localize
from .config import LOCALIZERS, PREDICTORS, PipelineConfig
from .episode import Models
from .experiment import Metrics, _g, episodes_to_csv, run_episodes

# Measured TOF ranges per distance, in milliseconds: (min, max, median)
TOF_TABLE = {5.12: (815.0, 1062.0, 974.0), 6.70: (1135.0, 1292.0, 1206.0)}


@dataclass
class TofRow:
    distance: float
    n: int
    min_ms: float
    max_ms: float
    median_ms: float
    band: tuple | None

    @property
    def in_band(self) -> bool | None:
        if self.band is None:
            return None
        return self.band[0] <= self.median_ms <= self.band[1]


def _band(distance: float):
    for d, (lo, hi, _) in TOF_TABLE.items():
        if abs(d - distance) < 1e-9:
            return lo, hi
    return None


def tof_report(distances=(5.12, 6.70), n: int = 200, seed: int = 0, dist: ThrowDistribution = ThrowDistribution(),
               profile: NoiseProfile = NoiseProfile(), z_plane: float = -0.4, gravity: float = 9.81) -> list[TofRow]:
    """Simulated TOF spread per throwing distance, with the reference band where one exists."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rows = []
    for j, d in enumerate(distances):
        tofs = []
        for i in range(n):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j, i)))
            tofs.append(sample_throw(rng, dist, profile.drag_coeff, z_plane, gravity, distance=float(d)).t_cross)
        ms = np.array(tofs) * 1000.0
        rows.append(TofRow(float(d), n, float(ms.min()), float(ms.max()), float(np.median(ms)), _band(d)))
    return rows


def tof_to_csv(rows: list[TofRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("distance", "n", "min_ms", "max_ms", "median_ms", "band_lo_ms", "band_hi_ms", "in_band"))
    for r in rows:
        lo, hi = r.band if r.band else ("", "")
        flag = "" if r.in_band is None else int(r.in_band)
        w.writerow([_g(r.distance), r.n, _g(r.min_ms), _g(r.max_ms), _g(r.median_ms), lo, hi, flag])
    return buf.getvalue()


@dataclass
class BlurRow:
    blur: int
    method: str
    n: int
    n_found: int
    mean_error: float

    @property
    def miss_rate(self) -> float:
        return 1.0 - self.n_found / self.n


def blur_study(blur_lengths=(0, 10, 20), n_frames: int = 200, localizer: Network | None = None, seed: int = 0,
               suite: SensorSuite = SensorSuite(), profile: NoiseProfile = NoiseProfile()) -> list[BlurRow]:
    """Mean 3-D localization error per method at each smear length.

    Every blur level renders the same object positions over the same
    clutter, so rows differ only in the smear. The colour filter's error is
    averaged over frames where it finds the object; its miss rate is
    reported alongside.
    """
    rows = []
    for b in blur_lengths:
        if b < 0:
            raise ValueError("blur lengths must be non-negative")
        ds = gen_localizer_data(n_frames, None, seed, split="test", profile=profile, suite=suite,
                                blur_range=(int(b), int(b)), blur_prob=1.0, clean_prob=0.0)
        cam = replace(suite.camera, depth_noise_sigma=profile.depth_noise_sigma)
        errs = []
        for data, label in zip(ds.frames, ds.labels):
            d = color_filter_localize(Frame(data), suite.hsv, cam, suite.min_pixels)
            if d is not None:
                errs.append(np.linalg.norm(d.position - label))
        rows.append(BlurRow(int(b), "color", n_frames, len(errs), float(np.mean(errs)) if errs else float("nan")))
        if localizer is not None:
            pred = np.concatenate([localizer.forward(ds.frames[i:i + 64]) for i in range(0, n_frames, 64)])
            err = np.linalg.norm(pred.astype(float) - ds.labels, axis=1)
            rows.append(BlurRow(int(b), "cnn", n_frames, n_frames, float(err.mean())))
    return rows


def blur_to_csv(rows: list[BlurRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("blur_px", "method", "n", "n_found", "miss_rate", "mean_error"))
    for r in rows:
        w.writerow([r.blur, r.method, r.n, r.n_found, _g(r.miss_rate), _g(r.mean_error)])
    return buf.getvalue()


ALL_PIPELINES = tuple(f"{loc}+{pred}" for loc in LOCALIZERS for pred in PREDICTORS)


def compare_pipelines(config: PipelineConfig, n_throws: int, models: Models, *, pipelines=ALL_PIPELINES,
                      out_dir=None, n_jobs: int = 1) -> list[Metrics]:
    """Run each localizer x predictor combination on the same seeded throws."""
    out = []
    for name in pipelines:
        cfg = config.with_pipeline(name)
        results = run_episodes(cfg, n_throws, models, n_jobs)
        m = Metrics.from_results(cfg.pipeline, results)
        out.append(m)
        if out_dir is not None:
            d = Path(out_dir)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"episodes_{name.replace('+', '_')}.csv").write_bytes(episodes_to_csv(results, name).encode())
    if out_dir is not None:
        d = Path(out_dir)
        (d / "comparison.csv").write_bytes(metrics_to_csv(out).encode())
        summary = {"pipelines": [m.to_dict() for m in out], "config": config.to_dict(), "n_throws": n_throws}
        (d / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


def metrics_to_csv(metrics: list[Metrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = list(metrics[0].to_dict()) if metrics else []
    w.writerow(keys)
    for m in metrics:
        d = m.to_dict()
        w.writerow([_g(d[k]) if isinstance(d[k], float) else d[k] for k in keys])
    return buf.getvalue()
