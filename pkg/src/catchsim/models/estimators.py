"""scikit-learn style wrappers around the two networks.

Inputs are rescaled per channel (no centring, so zero padding stays zero) and
targets are standardized while training. :meth:`export_network` folds both
transforms into the first and last layers, so the exported network maps raw
inputs to raw outputs and round-trips through a plain weights file.
"""

from __future__ import annotations

import copy

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from ..nn import Conv1D, Conv2D, Dense, Network, load_weights, save_weights
from .architectures import build_interceptor, build_localizer
from .features import N_FEATURES, WINDOW
from .training import train


def _rms(values: np.ndarray) -> float:
    r = float(np.sqrt(np.mean(values.astype(np.float64) ** 2))) if values.size else 0.0
    return r if r > 1e-12 else 1.0


def fold_scaling(network: Network, in_scale, y_mean, y_scale) -> Network:
    """Copy of ``network`` that accepts unscaled inputs and emits unscaled outputs."""
    net = copy.deepcopy(network)
    first, last = net.layers[0], net.layers[-1]
    in_scale = np.asarray(in_scale, np.float64)
    W = first.params["W"].astype(np.float64)
    if isinstance(first, (Conv1D, Conv2D)):
        # W is (out, in, ...); divide each input channel by its scale
        W = W / in_scale.reshape((1, -1) + (1,) * (W.ndim - 2))
    elif isinstance(first, Dense):
        W = W / in_scale[None, :]
    else:
        raise TypeError(f"cannot fold input scaling into {type(first).__name__}")
    first.params["W"] = W.astype(first.params["W"].dtype)
    if not isinstance(last, Dense):
        raise TypeError("last layer must be Dense to fold output scaling")
    y_scale = np.asarray(y_scale, np.float64)
    dtype = last.params["W"].dtype
    last.params["W"] = (last.params["W"].astype(np.float64) * y_scale[:, None]).astype(dtype)
    last.params["b"] = (last.params["b"].astype(np.float64) * y_scale + y_mean).astype(dtype)
    net.zero_grad()
    return net


class _NetworkRegressor(RegressorMixin, BaseEstimator):
    _channel_axis: int
    _input_ndim: int

    def _build(self) -> Network:
        raise NotImplementedError

    def _channel_scale(self, X) -> np.ndarray:
        raise NotImplementedError

    def _check_X(self, X):
        X = check_array(X, allow_nd=True, dtype=np.float32, ensure_2d=False)
        if X.ndim == self._input_ndim - 1:
            X = X[None]
        if X.ndim != self._input_ndim:
            raise ValueError(f"expected a {self._input_ndim}-d batch, got shape {X.shape}")
        return X

    def _scaled(self, X):
        shape = [1] * X.ndim
        shape[self._channel_axis] = -1
        return (X / self.in_scale_.reshape(shape)).astype(np.float32)

    def fit(self, X, y, X_val=None, y_val=None):
        X = self._check_X(X)
        y = check_array(y, dtype=np.float64)
        if len(X) != len(y):
            raise ValueError("X and y differ in length")
        self.network_ = self._build()
        if X.shape[1:] != self.network_.input_shape:
            raise ValueError(f"input shape {X.shape[1:]} does not match network {self.network_.input_shape}")
        self.in_scale_ = self._channel_scale(X)
        self.y_mean_ = y.mean(axis=0)
        std = y.std(axis=0)
        self.y_scale_ = np.where(std > 1e-12, std, 1.0)
        ys = ((y - self.y_mean_) / self.y_scale_).astype(np.float32)
        kw = {}
        if X_val is not None:
            Xv = self._check_X(X_val)
            kw = dict(X_val=self._scaled(Xv),
                      y_val=((np.asarray(y_val, float) - self.y_mean_) / self.y_scale_).astype(np.float32))
        result = train(self.network_, self._scaled(X), ys, epochs=self.epochs, lr=self.lr,
                       batch_size=self.batch_size, seed=self.random_state, log_every=self.log_every, **kw)
        # losses are reported in standardized target units
        self.loss_curve_ = result.train_loss
        self.val_loss_curve_ = result.val_loss
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def predict(self, X, batch_size: int = 256) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = self._check_X(X)
        out = [self.network_.forward(self._scaled(X[i:i + batch_size])) for i in range(0, len(X), batch_size)]
        out = np.concatenate(out) if out else np.zeros((0, self.network_.output_shape[0]))
        return out.astype(np.float64) * self.y_scale_ + self.y_mean_

    def export_network(self) -> Network:
        check_is_fitted(self, "network_")
        return fold_scaling(self.network_, self.in_scale_, self.y_mean_, self.y_scale_)

    def save(self, path) -> None:
        save_weights(self.export_network(), path)

    @classmethod
    def from_network(cls, network: Network, **params):
        """Wrap an already trained raw-unit network (e.g. loaded from a weights file)."""
        est = cls(**params)
        est.network_ = network
        C = network.input_shape[est._channel_axis - 1]
        est.in_scale_ = np.ones(C)
        out = network.output_shape[0]
        est.y_mean_, est.y_scale_ = np.zeros(out), np.ones(out)
        est.n_features_in_ = int(np.prod(network.input_shape))
        return est

    @classmethod
    def load(cls, path, **params):
        est = cls(**params)
        return cls.from_network(load_weights(path, est._build()), **params)


class InterceptorRegressor(_NetworkRegressor):
    """Detection window (N, 10, 5) to plane interception (N, 2)."""

    _channel_axis = 2
    _input_ndim = 3

    def __init__(self, conv_channels: int = 32, kernel: int = 3, dense=(64, 32), window: int = WINDOW,
                 epochs: int = 200, lr: float = 1e-4, batch_size: int = 32, random_state: int = 0,
                 log_every: int = 0):
        self.conv_channels = conv_channels
        self.kernel = kernel
        self.dense = dense
        self.window = window
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.random_state = random_state
        self.log_every = log_every

    def _build(self):
        return build_interceptor(conv_channels=self.conv_channels, kernel=self.kernel, dense=tuple(self.dense),
                                 window=self.window, seed=self.random_state)

    def _channel_scale(self, X):
        rows = X.reshape(-1, N_FEATURES)
        rows = rows[np.any(rows != 0, axis=1)]
        return np.array([_rms(rows[:, j]) for j in range(N_FEATURES)])


class LocalizerRegressor(_NetworkRegressor):
    """RGB-D frame (N, 4, H, W) to object position (N, 3)."""

    _channel_axis = 1
    _input_ndim = 4

    def __init__(self, input_h: int = 60, input_w: int = 80, channels=(16, 32, 64, 128), dense: int = 128,
                 kernel: int = 3, epochs: int = 200, lr: float = 1e-4, batch_size: int = 32,
                 random_state: int = 0, log_every: int = 0):
        self.input_h = input_h
        self.input_w = input_w
        self.channels = channels
        self.dense = dense
        self.kernel = kernel
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.random_state = random_state
        self.log_every = log_every

    def _build(self):
        return build_localizer(self.input_h, self.input_w, channels=tuple(self.channels), dense=self.dense,
                               kernel=self.kernel, seed=self.random_state)

    def _channel_scale(self, X):
        return np.array([_rms(X[:, c]) for c in range(X.shape[1])])

    def localize_frames(self, frames) -> list:
        """Positions for a list of :class:`~catchsim.sensors.Frame` (the episode localizer hook)."""
        if not frames:
            return []
        return list(self.predict(np.stack([f.data for f in frames])))
