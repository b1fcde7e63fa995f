from __future__ import annotations

import numpy as np

from ..ballistics import GRAVITY, Z_PLANE
from ..baseline_predictor import InterceptionPoint, NoPredictionError, PredictionSource, fit_trajectory, predict_interception
from ..nn import Network
from ..sensors import DetectionBuffer
from .features import pack_features


def nn_predict_interception(model, buffer, z_plane: float = Z_PLANE, gravity: float = GRAVITY,
                            t_first: float | None = None) -> InterceptionPoint:
    """Network estimate of the plane crossing for the detections so far.

    ``model`` is a raw-unit :class:`Network` or a fitted regressor. The crossing
    time comes from the ballistic depth fit once three detections exist.
    """
    arr = buffer.to_array() if isinstance(buffer, DetectionBuffer) else np.asarray(buffer, float).reshape(-1, 5)
    if len(arr) == 0:
        raise ValueError("empty detection buffer")
    x = pack_features(arr, t_first=t_first)
    if isinstance(model, Network):
        xy = model.forward(x)
    else:
        xy = model.predict(x[None])[0]
    t_cross = None
    if len(arr) >= 3:
        try:
            t_cross = predict_interception(fit_trajectory(arr, gravity), z_plane).t_cross
        except (NoPredictionError, np.linalg.LinAlgError):
            t_cross = None
    return InterceptionPoint(float(xy[0]), float(xy[1]), z_plane, t_cross, PredictionSource.NETWORK)
