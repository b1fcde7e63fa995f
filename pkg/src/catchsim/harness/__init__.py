"""Episode simulation, Monte Carlo experiments, studies and the command line."""

from .config import ConfigError, PipelineConfig, parse_pipeline
from .episode import (EpisodeResult, MissingWeightsError, Models, Prediction, episode_seed, load_interceptor,
                      load_localizer, load_models, run_episode)
from .experiment import Metrics, episodes_to_csv, run_episodes, run_experiment, wilson_interval
from .studies import (ALL_PIPELINES, TOF_TABLE, BlurRow, TofRow, blur_study, compare_pipelines, metrics_to_csv,
                      tof_report)

__all__ = [
    "ALL_PIPELINES", "BlurRow", "ConfigError", "EpisodeResult", "Metrics", "MissingWeightsError", "Models",
    "PipelineConfig", "Prediction", "TOF_TABLE", "TofRow", "blur_study", "compare_pipelines", "episode_seed",
    "episodes_to_csv", "load_interceptor", "load_localizer", "load_models", "metrics_to_csv", "parse_pipeline",
    "run_episode", "run_episodes", "run_experiment", "tof_report", "wilson_interval",
]
