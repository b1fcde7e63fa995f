"""Monte Carlo catch experiments and their CSV / JSON outputs."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import PipelineConfig
from .episode import EpisodeResult, Models, load_models, run_episode

EPISODE_COLUMNS = ("episode", "pipeline", "success", "miss_distance", "tof", "distance", "travel", "x_cross",
                   "y_cross", "ee_x", "ee_y", "n_camera", "n_radar", "n_predictions", "n_clamped")


def _g(x) -> str:
    return f"{float(x):.9g}"


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the bounds are exactly 0 and 1 at the extremes; pin them against rounding
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return lo, hi


@dataclass
class Metrics:
    label: str
    n: int
    catch_rate: float
    ci_low: float
    ci_high: float
    miss_mean: float
    miss_p50: float
    miss_p90: float
    tof_min: float
    tof_max: float
    tof_median: float

    @classmethod
    def from_results(cls, label: str, results: list[EpisodeResult]) -> "Metrics":
        if not results:
            raise ValueError("no episodes to aggregate")
        miss = np.array([r.outcome.miss_distance for r in results])
        tof = np.array([r.tof for r in results])
        k = sum(r.success for r in results)
        lo, hi = wilson_interval(k, len(results))
        return cls(label, len(results), k / len(results), lo, hi, float(miss.mean()),
                   float(np.percentile(miss, 50)), float(np.percentile(miss, 90)),
                   float(tof.min()), float(tof.max()), float(np.median(tof)))

    def to_dict(self) -> dict:
        # fixed precision keeps the JSON byte-stable
        return {k: (float(_g(v)) if isinstance(v, float) else v) for k, v in asdict(self).items()}


def episodes_to_csv(results: list[EpisodeResult], pipeline: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPISODE_COLUMNS)
    for i, r in enumerate(results):
        o = r.outcome
        w.writerow([i, pipeline, int(o.success), _g(o.miss_distance), _g(r.tof), _g(r.distance), _g(r.travel),
                    _g(o.object_at_cross[0]), _g(o.object_at_cross[1]), _g(o.ee_at_cross[0]), _g(o.ee_at_cross[1]),
                    r.n_camera, r.n_radar, len(r.history), r.n_clamped])
    return buf.getvalue()


# worker-process state, filled once per process by the pool initializer
_WORKER: dict = {}


def _init_worker(config: PipelineConfig, models: Models):
    _WORKER["config"] = config
    _WORKER["models"] = models


def _run_one(index: int) -> EpisodeResult:
    with threadpool_limits(1):
        return run_episode(_WORKER["config"], _WORKER["config"].seed, _WORKER["models"], seed_index=index)


def run_episodes(config: PipelineConfig, n_throws: int, models: Models | None = None,
                 n_jobs: int = 1) -> list[EpisodeResult]:
    """Episodes ``0..n_throws-1`` of ``config.seed``, in index order whatever ``n_jobs`` is."""
    if n_throws < 1:
        raise ValueError("n_throws must be at least 1")
    if models is None:
        models = load_models(config)
    if n_jobs <= 1:
        _init_worker(config, models)
        return [_run_one(i) for i in range(n_throws)]
    with ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker, initargs=(config, models)) as ex:
        return list(ex.map(_run_one, range(n_throws), chunksize=max(1, n_throws // (4 * n_jobs))))


def write_outputs(out_dir, results: list[EpisodeResult], metrics: Metrics, config: PipelineConfig,
                  name: str = "episodes.csv") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(episodes_to_csv(results, metrics.label).encode())
    summary = {"metrics": metrics.to_dict(), "config": config.to_dict()}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def run_experiment(config: PipelineConfig, n_throws: int, models: Models | None = None, *,
                   out_dir=None, n_jobs: int = 1) -> tuple[Metrics, list[EpisodeResult]]:
    """Seeded episodes aggregated into catch-rate metrics, optionally written to ``out_dir``."""
    results = run_episodes(config, n_throws, models, n_jobs)
    metrics = Metrics.from_results(config.pipeline, results)
    if out_dir is not None:
        write_outputs(out_dir, results, metrics, config)
    return metrics, results
