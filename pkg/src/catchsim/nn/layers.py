"""Layers with explicit forward/backward passes.

Batches always carry a leading sample axis. Conv2D works on (N, C, H, W);
Conv1D works channels-last on (N, L, C) so a detection window of shape
(steps, features) feeds it directly.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class LayerKind(IntEnum):
    DENSE = 0
    CONV1D = 1
    CONV2D = 2
    MAXPOOL2D = 3
    PRELU = 4
    FLATTEN = 5


class BackwardBeforeForwardError(RuntimeError):
    pass


def glorot_uniform(rng, shape, fan_in, fan_out, dtype=np.float32):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape).astype(dtype)


class Layer:
    kind: LayerKind
    param_names: tuple[str, ...] = ()

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def output_shape(self, input_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # layers set this False when nobody needs the gradient w.r.t. their input
    needs_input_grad = True

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _cached(self):
        if self._cache is None:
            raise BackwardBeforeForwardError(f"{type(self).__name__}.backward called before forward")
        return self._cache

    def pattern(self):
        """Discrete branch state of the last forward (kinks), or None."""
        return None

    def weight_shape(self) -> tuple:
        """Shape recorded in the weights file (the first parameter's shape)."""
        if not self.param_names:
            return ()
        return self.params[self.param_names[0]].shape

    def zero_grad(self):
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def astype(self, dtype):
        for k in self.params:
            self.params[k] = self.params[k].astype(dtype)
        self.zero_grad()
        return self

    def __repr__(self):
        shapes = ", ".join(f"{k}={v.shape}" for k, v in self.params.items())
        return f"{type(self).__name__}({shapes})"


class Dense(Layer):
    kind = LayerKind.DENSE
    param_names = ("W", "b")

    def __init__(self, n_in: int, n_out: int, rng=None, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(rng)
        self.n_in, self.n_out = n_in, n_out
        self.params["W"] = glorot_uniform(rng, (n_out, n_in), n_in, n_out, dtype)
        self.params["b"] = np.zeros(n_out, dtype)
        self.zero_grad()

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.n_in,):
            raise ValueError(f"Dense expects ({self.n_in},), got {input_shape}")
        return (self.n_out,)

    def forward(self, x):
        self._cache = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, grad):
        x = self._cached()
        self.grads["W"] += grad.T @ x
        self.grads["b"] += grad.sum(axis=0)
        if not self.needs_input_grad:
            return None
        return grad @ self.params["W"]


class Conv1D(Layer):
    """Valid cross-correlation along the step axis, stride 1."""

    kind = LayerKind.CONV1D
    param_names = ("W", "b")

    def __init__(self, c_in: int, c_out: int, kernel: int, rng=None, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(rng)
        self.c_in, self.c_out, self.k = c_in, c_out, kernel
        self.params["W"] = glorot_uniform(rng, (c_out, c_in, kernel), c_in * kernel, c_out * kernel, dtype)
        self.params["b"] = np.zeros(c_out, dtype)
        self.zero_grad()

    def output_shape(self, input_shape):
        L, C = input_shape
        if C != self.c_in or L < self.k:
            raise ValueError(f"Conv1D({self.c_in}->{self.c_out}, k={self.k}) cannot take {input_shape}")
        return (L - self.k + 1, self.c_out)

    def forward(self, x):
        win = sliding_window_view(x, self.k, axis=1)  # (N, L', C, k)
        self._cache = (x.shape, win)
        return np.tensordot(win, self.params["W"], axes=([2, 3], [1, 2])) + self.params["b"]

    def backward(self, grad):
        shape, win = self._cached()
        W = self.params["W"]
        self.grads["W"] += np.tensordot(grad, win, axes=([0, 1], [0, 1]))
        self.grads["b"] += grad.sum(axis=(0, 1))
        if not self.needs_input_grad:
            return None
        dx = np.zeros(shape, dtype=grad.dtype)
        for j in range(self.k):
            dx[:, j:j + grad.shape[1], :] += grad @ W[:, :, j]
        return dx


class Conv2D(Layer):
    """Valid 2-D cross-correlation, square kernel, stride 1."""

    kind = LayerKind.CONV2D
    param_names = ("W", "b")

    def __init__(self, c_in: int, c_out: int, kernel: int = 3, rng=None, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(rng)
        self.c_in, self.c_out, self.k = c_in, c_out, kernel
        fan = kernel * kernel
        self.params["W"] = glorot_uniform(rng, (c_out, c_in, kernel, kernel), c_in * fan, c_out * fan, dtype)
        self.params["b"] = np.zeros(c_out, dtype)
        self.zero_grad()

    def output_shape(self, input_shape):
        C, H, W = input_shape
        if C != self.c_in or H < self.k or W < self.k:
            raise ValueError(f"Conv2D({self.c_in}->{self.c_out}, k={self.k}) cannot take {input_shape}")
        return (self.c_out, H - self.k + 1, W - self.k + 1)

    def forward(self, x):
        k = self.k
        N, C, H, W = x.shape
        Ho, Wo = H - k + 1, W - k + 1
        # im2col laid out (C, k, k, N, Ho, Wo): k*k slice copies beat a strided transpose
        cols = np.empty((C, k, k, N, Ho, Wo), dtype=x.dtype)
        xt = x.transpose(1, 0, 2, 3)
        for a in range(k):
            for b in range(k):
                cols[:, a, b] = xt[:, :, a:a + Ho, b:b + Wo]
        cols = cols.reshape(C * k * k, -1)
        self._cache = (x.shape, cols)
        out = self.params["W"].reshape(self.c_out, -1) @ cols + self.params["b"][:, None]
        return out.reshape(self.c_out, N, Ho, Wo).transpose(1, 0, 2, 3)

    def backward(self, grad):
        shape, cols = self._cached()
        k = self.k
        N, C, H, W = shape
        Ho, Wo = H - k + 1, W - k + 1
        g2 = grad.transpose(1, 0, 2, 3).reshape(self.c_out, -1)
        self.grads["W"] += (g2 @ cols.T).reshape(self.params["W"].shape)
        self.grads["b"] += g2.sum(axis=1)
        if not self.needs_input_grad:
            return None
        # input gradient: scatter the column gradients back onto the image
        dcols = (self.params["W"].reshape(self.c_out, -1).T @ g2).reshape(C, k, k, N, Ho, Wo)
        dxt = np.zeros((C, N, H, W), dtype=grad.dtype)
        for a in range(k):
            for b in range(k):
                dxt[:, :, a:a + Ho, b:b + Wo] += dcols[:, a, b]
        return dxt.transpose(1, 0, 2, 3)


class MaxPool2D(Layer):
    """2x2 max pooling, stride 2; a trailing odd row/column is dropped."""

    kind = LayerKind.MAXPOOL2D

    def output_shape(self, input_shape):
        C, H, W = input_shape
        if H < 2 or W < 2:
            raise ValueError(f"MaxPool2D cannot take {input_shape}")
        return (C, H // 2, W // 2)

    @staticmethod
    def _quarters(x):
        Ho, Wo = x.shape[2] // 2, x.shape[3] // 2
        # the four window positions in row-major order
        return [x[:, :, r:2 * Ho:2, c:2 * Wo:2] for r in (0, 1) for c in (0, 1)]

    def forward(self, x):
        q = self._quarters(x)
        out = np.maximum(np.maximum(q[0], q[1]), np.maximum(q[2], q[3]))
        self._cache = (x, out)
        return out

    def _winner_masks(self):
        x, out = self._cached()
        taken = np.zeros(out.shape, dtype=bool)
        masks = []
        for qk in self._quarters(x):
            m = (qk == out) & ~taken  # ties go to the first index in row-major order
            taken |= m
            masks.append(m)
        return masks

    def backward(self, grad):
        x, _ = self._cached()
        dx = np.zeros(x.shape, dtype=grad.dtype)
        for (r, c), m in zip(((0, 0), (0, 1), (1, 0), (1, 1)), self._winner_masks()):
            Ho, Wo = m.shape[2], m.shape[3]
            dx[:, :, r:2 * Ho:2, c:2 * Wo:2] = grad * m
        return dx

    def pattern(self):
        if self._cache is None:
            return None
        return np.argmax(np.stack(self._winner_masks()), axis=0)


class PReLU(Layer):
    """y = x for x >= 0, a * x otherwise, one learned slope per channel."""

    kind = LayerKind.PRELU
    param_names = ("a",)

    def __init__(self, n_channels: int, channel_axis: int = -1, init: float = 0.25, dtype=np.float32):
        super().__init__()
        self.n_channels = n_channels
        self.channel_axis = channel_axis
        self.params["a"] = np.full(n_channels, init, dtype)
        self.zero_grad()

    def output_shape(self, input_shape):
        # channel_axis counts the batch axis; shapes here do not
        ax = self.channel_axis - 1 if self.channel_axis > 0 else self.channel_axis
        if input_shape[ax] != self.n_channels:
            raise ValueError(f"PReLU({self.n_channels}) on axis {self.channel_axis} cannot take {input_shape}")
        return tuple(input_shape)

    def _slope(self, ndim):
        shape = [1] * ndim
        shape[self.channel_axis] = self.n_channels
        return self.params["a"].reshape(shape)

    def forward(self, x):
        neg = np.minimum(x, 0)
        self._cache = neg
        return x + (self._slope(x.ndim) - 1) * neg

    def backward(self, grad):
        neg = self._cached()
        C = self.n_channels
        if self.channel_axis % neg.ndim == neg.ndim - 1:
            ga = np.einsum("ic,ic->c", neg.reshape(-1, C), grad.reshape(-1, C))
        else:
            N = neg.shape[0]
            ga = np.einsum("ncx,ncx->c", neg.reshape(N, C, -1), grad.reshape(N, C, -1))
        self.grads["a"] += ga
        return grad + (self._slope(neg.ndim) - 1) * (grad * (neg < 0))

    def pattern(self):
        return None if self._cache is None else self._cache < 0


class Flatten(Layer):
    kind = LayerKind.FLATTEN

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cached())
