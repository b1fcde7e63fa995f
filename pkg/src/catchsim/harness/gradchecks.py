"""Finite-difference checks over every layer type and both architectures."""

from __future__ import annotations

import numpy as np

from ..models.architectures import build_interceptor, build_localizer
from ..nn import Conv1D, Conv2D, Dense, Flatten, MaxPool2D, Network, PReLU, gradient_check


def _cases(rng):
    yield "dense", Network([Dense(5, 4, rng)], (5,)), rng.normal(size=(3, 5))
    yield "conv1d", Network([Conv1D(5, 4, 3, rng), Flatten()], (10, 5)), rng.normal(size=(2, 10, 5))
    yield "conv2d", Network([Conv2D(2, 3, 3, rng), Flatten()], (2, 7, 8)), rng.normal(size=(2, 2, 7, 8))
    yield "maxpool2d", Network([MaxPool2D(), Flatten()], (2, 6, 7)), rng.normal(size=(2, 2, 6, 7))
    prelu = PReLU(4, channel_axis=-1)
    prelu.params["a"] = rng.uniform(0.1, 0.5, 4).astype(np.float32)
    yield "prelu", Network([prelu], (4,)), rng.normal(size=(6, 4))
    prelu2 = PReLU(3, channel_axis=1)
    prelu2.params["a"] = rng.uniform(0.1, 0.5, 3).astype(np.float32)
    yield "prelu-channels-first", Network([prelu2, Flatten()], (3, 4, 5)), rng.normal(size=(2, 3, 4, 5))
    yield "interceptor", build_interceptor(seed=int(rng.integers(2**31))), rng.normal(size=(4, 10, 5))
    # smallest input the four valid-conv stages accept is 46 pixels per side
    loc = build_localizer(46, 48, channels=(2, 3, 4, 4), dense=8, seed=int(rng.integers(2**31)))
    yield "localizer-reduced", loc, rng.normal(size=(2, 4, 46, 48))


def run_gradchecks(seed: int = 0, tolerance: float = 1e-4) -> list[tuple[str, object]]:
    """``(name, GradCheckReport)`` for each layer type and both architectures."""
    rng = np.random.default_rng(seed)
    out = []
    for name, net, x in _cases(rng):
        y = net.forward(x)
        target = rng.normal(size=np.shape(y))
        out.append((name, gradient_check(net, x, target, tolerance=tolerance)))
    return out
