from __future__ import annotations

import numpy as np

from ..nn import Conv1D, Conv2D, Dense, Flatten, MaxPool2D, Network, PReLU
from .features import N_FEATURES, WINDOW


def build_localizer(input_h: int = 60, input_w: int = 80, *, channels=(16, 32, 64, 128), dense: int = 128,
                    in_channels: int = 4, kernel: int = 3, seed=0) -> Network:
    """Four conv + PReLU + max-pool stages, then two dense layers, regressing (x, y, z)."""
    rng = np.random.default_rng(seed)
    layers = []
    c_prev = in_channels
    h, w = input_h, input_w
    for i, c in enumerate(channels):
        h, w = h - kernel + 1, w - kernel + 1
        if h < 2 or w < 2:
            raise ValueError(f"input {input_h}x{input_w} does not compose: stage {i} conv output {h}x{w}")
        h, w = h // 2, w // 2
        layers += [Conv2D(c_prev, c, kernel, rng=rng), PReLU(c, channel_axis=1), MaxPool2D()]
        c_prev = c
    flat = c_prev * h * w
    layers += [Flatten(), Dense(flat, dense, rng=rng), PReLU(dense), Dense(dense, 3, rng=rng)]
    return Network(layers, (in_channels, input_h, input_w))


def build_interceptor(*, conv_channels: int = 32, kernel: int = 3, dense=(64, 32), window: int = WINDOW,
                      seed=0) -> Network:
    """Conv1D over the detection window, then three dense layers to the (x, y) interception."""
    rng = np.random.default_rng(seed)
    layers = [Conv1D(N_FEATURES, conv_channels, kernel, rng=rng), PReLU(conv_channels), Flatten()]
    n = (window - kernel + 1) * conv_channels
    for width in dense:
        layers += [Dense(n, width, rng=rng), PReLU(width)]
        n = width
    layers.append(Dense(n, 2, rng=rng))
    return Network(layers, (window, N_FEATURES))
