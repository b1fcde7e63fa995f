"""Fixed-size detection windows for the interception network."""

from __future__ import annotations

import numpy as np

from ..sensors import DetectionBuffer

WINDOW = 10
N_FEATURES = 5  # x, y, z, elapsed, sensor flag


def _as_array(buffer) -> np.ndarray:
    if isinstance(buffer, DetectionBuffer):
        return buffer.to_array()
    return np.asarray(buffer, dtype=float).reshape(-1, 5)


def pack_features(buffer, window: int = WINDOW, t_first: float | None = None) -> np.ndarray:
    """Last ``window`` detections as rows of ``x, y, z, elapsed, flag``, oldest first.

    Missing leading rows stay all-zero. ``elapsed`` counts from the first
    detection of the episode (``t_first``, default the buffer's first entry).
    """
    arr = _as_array(buffer)
    if len(arr) == 0:
        raise ValueError("cannot pack an empty detection buffer")
    t0 = arr[0, 0] if t_first is None else t_first
    tail = arr[-window:]
    out = np.zeros((window, N_FEATURES), dtype=np.float32)
    rows = np.column_stack([tail[:, 1:4], tail[:, 0] - t0, tail[:, 4]])
    out[window - len(tail):] = rows
    return out


def unpack_features(matrix, t_first: float = 0.0) -> DetectionBuffer:
    """Inverse of :func:`pack_features` for the populated rows."""
    m = np.asarray(matrix, dtype=float)
    populated = np.any(m != 0, axis=1)
    start = int(np.argmax(populated)) if populated.any() else len(m)
    rows = m[start:]
    arr = np.column_stack([rows[:, 3] + t_first, rows[:, 0:3], rows[:, 4]])
    return DetectionBuffer.from_array(arr)


def snapshot_windows(detections: np.ndarray, min_points: int = 3, window: int = WINDOW) -> np.ndarray:
    """One packed window per prefix of length ``min_points..n`` (array form, (m, window, 5))."""
    arr = np.asarray(detections, dtype=float)
    n = len(arr)
    if n < min_points:
        return np.zeros((0, window, N_FEATURES), dtype=np.float32)
    t0 = arr[0, 0]
    feats = np.column_stack([arr[:, 1:4], arr[:, 0] - t0, arr[:, 4]]).astype(np.float32)
    padded = np.vstack([np.zeros((window - 1, N_FEATURES), np.float32), feats])
    # prefix k ends at detection k-1, i.e. padded row k-1+window-1
    idx = np.arange(min_points, n + 1)[:, None] + np.arange(window)[None, :] - 1
    return padded[idx]
