from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from .layers import Layer


class Network:
    """Sequential stack of layers with cached activations for backprop."""

    def __init__(self, layers: Sequence[Layer], input_shape: tuple | None = None):
        self.layers = list(layers)
        self.input_shape = None if input_shape is None else tuple(input_shape)
        self._dtype = np.dtype(np.float32)  # used when no layer has parameters
        self.output_shape = self._check_shapes() if self.input_shape is not None else None

    def _check_shapes(self) -> tuple:
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ValueError as e:
                raise ValueError(f"layer {i}: {e}") from None
        return shape

    @property
    def dtype(self):
        for _, _, p in self.parameters():
            return p.dtype
        return self._dtype

    def parameters(self) -> Iterator[tuple[int, str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name in layer.param_names:
                yield i, name, layer.params[name]

    def gradients(self) -> list[np.ndarray]:
        return [self.layers[i].grads[name] for i, name, _ in self.parameters()]

    def n_parameters(self) -> int:
        return sum(p.size for _, _, p in self.parameters())

    def forward(self, x) -> np.ndarray:
        """Run a batch ``(N, *input_shape)``; a single unbatched sample is also accepted."""
        x = np.asarray(x)
        single = self.input_shape is not None and x.shape == self.input_shape
        if single:
            x = x[None]
        if self.input_shape is not None and x.shape[1:] != self.input_shape:
            raise ValueError(f"input shape {x.shape[1:]} does not match network input {self.input_shape}")
        x = x.astype(self.dtype, copy=False)
        for layer in self.layers:
            x = layer.forward(x)
        return x[0] if single else x

    def backward(self, loss_grad, input_grad: bool = True) -> np.ndarray | None:
        """Accumulate parameter gradients.

        Returns the gradient w.r.t. the input batch, or None when
        ``input_grad`` is false (lets the first layer skip that work).
        """
        g = np.asarray(loss_grad, dtype=self.dtype)
        if self.layers:
            self.layers[0].needs_input_grad = input_grad
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def astype(self, dtype) -> "Network":
        self._dtype = np.dtype(dtype)
        for layer in self.layers:
            layer.astype(dtype)
        return self

    def pattern(self) -> list:
        return [p for p in (layer.pattern() for layer in self.layers) if p is not None]

    def __repr__(self):
        body = "\n".join(f"  {layer!r}" for layer in self.layers)
        return f"Network(input_shape={self.input_shape}, output_shape={self.output_shape}\n{body}\n)"


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean squared error over every element and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 * diff / diff.size).astype(pred.dtype)
    return loss, grad
