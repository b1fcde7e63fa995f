"""Network architectures, feature packing, datasets and training."""

from .architectures import build_interceptor, build_localizer
from .datasets import (LOCALIZER_SPLITS, TRAJECTORY_SPLITS, LabelSource, LocalizerDataset, Split,
                       TrajectoryDataset, TrajectorySample, augment_trajectories, gen_localizer_data,
                       gen_localizer_splits, gen_trajectory_data, gen_trajectory_splits, load_localizer_dataset,
                       load_trajectory_dataset, save_localizer_dataset, save_trajectory_dataset)
from .estimators import InterceptorRegressor, LocalizerRegressor, fold_scaling
from .features import N_FEATURES, WINDOW, pack_features, snapshot_windows, unpack_features
from .inference import nn_predict_interception
from .training import TrainResult, evaluate_loss, train

__all__ = [
    "InterceptorRegressor", "LOCALIZER_SPLITS", "LabelSource", "LocalizerDataset", "LocalizerRegressor",
    "N_FEATURES", "Split", "TRAJECTORY_SPLITS", "TrainResult", "TrajectoryDataset", "TrajectorySample",
    "WINDOW", "augment_trajectories", "build_interceptor", "build_localizer", "evaluate_loss", "fold_scaling",
    "gen_localizer_data", "gen_localizer_splits", "gen_trajectory_data", "gen_trajectory_splits",
    "load_localizer_dataset", "load_trajectory_dataset", "nn_predict_interception", "pack_features",
    "save_localizer_dataset", "save_trajectory_dataset", "snapshot_windows", "train", "unpack_features",
]
