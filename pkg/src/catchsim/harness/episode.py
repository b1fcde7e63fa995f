"""One simulated catch attempt on a 1 ms clock.

Sensor detections are produced up front (they do not depend on the robot)
and released into the buffer at their timestamps. A single prediction worker
turns the buffer into an interception point; the result is delivered after a
sampled inference latency. New detections arriving meanwhile mark exactly one
pending refresh, which starts from the then-current buffer as soon as the
worker is free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..baseline_predictor import InterceptionPoint, NoPredictionError, ballistic_interception
from ..controller import CatchOutcome, RobotTrace, control_step, evaluate_catch, update_goal
from ..models.features import N_FEATURES, WINDOW
from ..models.inference import nn_predict_interception
from ..nn import Network, load_weights
from ..scenario import TICK, observe_throw, sample_throw
from ..sensors import DetectionBuffer, Source, merge_streams
from .config import PipelineConfig


class MissingWeightsError(RuntimeError):
    pass


@dataclass
class Models:
    """Trained networks in raw units (inputs and outputs unscaled)."""

    localizer: Network | None = None
    interceptor: Network | None = None

    def localize(self, frames) -> list:
        if not frames:
            return []
        out = []
        for i in range(0, len(frames), 64):
            out.extend(self.localizer.forward(np.stack([f.data for f in frames[i:i + 64]])).astype(float))
        return out


def load_interceptor(path) -> Network:
    return Network(load_weights(path).layers, (WINDOW, N_FEATURES))


def load_localizer(path, height: int, width: int) -> Network:
    return Network(load_weights(path).layers, (4, height, width))


def load_models(config: PipelineConfig) -> Models:
    """Networks the pipeline needs, read from the configured weight files."""
    m = Models()
    if config.localizer == "cnn":
        if not config.localizer_weights:
            raise MissingWeightsError("cnn localizer selected but localizer_weights is not set")
        cam = config.sensor_suite().camera
        m.localizer = load_localizer(config.localizer_weights, cam.height, cam.width)
    if config.predictor == "cnn":
        if not config.interceptor_weights:
            raise MissingWeightsError("cnn predictor selected but interceptor_weights is not set")
        m.interceptor = load_interceptor(config.interceptor_weights)
    return m


@dataclass
class Prediction:
    t: float  # delivery time
    point: InterceptionPoint
    trigger_t: float  # timestamp of the newest detection the job saw
    n_points: int


@dataclass
class EpisodeResult:
    seed: int
    outcome: CatchOutcome
    tof: float
    distance: float
    travel: float
    n_camera: int
    n_radar: int
    history: list = field(default_factory=list)
    n_clamped: int = 0
    trace: RobotTrace | None = None
    detections: DetectionBuffer | None = None

    @property
    def success(self) -> bool:
        return self.outcome.success


def episode_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Seed stream of episode ``index``; shared by all pipelines for paired runs."""
    return np.random.SeedSequence(base_seed, spawn_key=(index,))


def _predict(config: PipelineConfig, models: Models, arr: np.ndarray, t_first: float) -> InterceptionPoint:
    if config.predictor == "cnn":
        return nn_predict_interception(models.interceptor, arr, config.z_plane, config.gravity, t_first=t_first)
    return ballistic_interception(arr, config.z_plane, config.gravity, fit_mode=config.fit_mode)


def run_episode(config: PipelineConfig, seed, models: Models | None = None, *, keep_trace: bool = False,
                seed_index: int | None = None) -> EpisodeResult:
    """Simulate one throw end to end.

    ``seed`` is an int or a SeedSequence; with ``seed_index`` the episode
    uses ``episode_seed(seed, seed_index)``.
    """
    if models is None:
        models = load_models(config)
    if config.localizer == "cnn" and models.localizer is None:
        raise MissingWeightsError("cnn localizer selected but no localizer network given")
    if config.predictor == "cnn" and models.interceptor is None:
        raise MissingWeightsError("cnn predictor selected but no interceptor network given")
    ss = episode_seed(seed, seed_index) if seed_index is not None else (
        seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed))
    throw_ss, obs_ss, lat_ss = ss.spawn(3)

    profile = config.profile()
    throw = sample_throw(np.random.default_rng(throw_ss), config.throw_distribution(), profile.drag_coeff,
                         config.z_plane, config.gravity)
    obs = observe_throw(throw, config.sensor_suite(), profile, obs_ss,
                        localizer=models.localize if config.localizer == "cnn" else None)
    stream = list(merge_streams(obs.camera, obs.radar))
    lat_rng = np.random.default_rng(lat_ss)
    lat_lo, lat_hi = config.latency

    robot = config.make_robot()
    goal = robot.position.copy()
    trace = RobotTrace()
    buffer = DetectionBuffer()
    history: list[Prediction] = []
    n_clamped = 0
    nxt = 0
    pending = False
    job = None  # (delivery tick, point or None, trigger time, n points)

    n_ticks = int(math.ceil(throw.t_cross / TICK)) + 1
    trace.record(0.0, robot)
    for k in range(n_ticks + 1):
        t = k * TICK
        # detections timestamped at this tick enter the buffer
        while nxt < len(stream) and stream[nxt].t <= t + 1e-9:
            buffer.append(stream[nxt])
            nxt += 1
            pending = True
        if job is not None and job[0] <= k:
            _, point, trig, npts = job
            job = None
            if point is not None:
                goal, clamped = update_goal(goal, point, robot)
                n_clamped += clamped
                history.append(Prediction(t, point, trig, npts))
        if job is None and pending and len(buffer) >= config.min_points:
            pending = False
            arr = buffer.to_array()
            try:
                point = _predict(config, models, arr, arr[0, 0])
            except (NoPredictionError, np.linalg.LinAlgError):
                point = None
            latency = lat_rng.uniform(lat_lo, lat_hi) if lat_hi > lat_lo else lat_lo
            # ceil: a prediction is never delivered before its latency has elapsed
            due = k + int(math.ceil(latency / TICK - 1e-9))
            job = (due, point, float(arr[-1, 0]), len(arr))
            if due <= k:
                # zero latency: deliver within the same tick
                job = None
                if point is not None:
                    goal, clamped = update_goal(goal, point, robot)
                    n_clamped += clamped
                    history.append(Prediction(t, point, float(arr[-1, 0]), len(arr)))
        if k == n_ticks:
            break
        cmd = control_step(robot, goal, TICK)
        robot.advance(cmd, TICK)
        trace.record(t + TICK, robot)

    outcome = evaluate_catch(trace, throw.trajectory, config.z_plane, config.basket_radius)
    n_cam = sum(1 for d in stream if d.source == Source.CAMERA)
    return EpisodeResult(
        seed=int(ss.spawn_key[-1]) if ss.spawn_key else int(ss.entropy),
        outcome=outcome, tof=throw.t_cross, distance=throw.distance, travel=throw.travel,
        n_camera=n_cam, n_radar=len(stream) - n_cam, history=history, n_clamped=n_clamped,
        trace=trace if keep_trace else None, detections=DetectionBuffer(stream) if keep_trace else None)
