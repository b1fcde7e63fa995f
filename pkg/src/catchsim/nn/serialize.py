"""PGNN weights file.

Layout (little-endian)::

    b"PGNN" | version u32 | layer count u32
    per layer: kind u8 | rank u8 | dims u32 * rank | float32 data

The recorded shape is the layer's first parameter (weights, or PReLU
slopes). Dense and conv layers append their bias, whose length is dims[0].
"""

from __future__ import annotations

import struct

import numpy as np

from .layers import Conv1D, Conv2D, Dense, Flatten, LayerKind, MaxPool2D, PReLU
from .network import Network

MAGIC = b"PGNN"
VERSION = 1


class WeightsFormatError(ValueError):
    pass


def _param_arrays(layer) -> list[np.ndarray]:
    return [layer.params[n] for n in layer.param_names]


def weights_to_bytes(network: Network) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(network.layers))]
    for layer in network.layers:
        shape = layer.weight_shape()
        out.append(struct.pack("<BB", int(layer.kind), len(shape)))
        out.append(struct.pack(f"<{len(shape)}I", *shape))
        for arr in _param_arrays(layer):
            out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def save_weights(network: Network, path) -> None:
    with open(path, "wb") as f:
        f.write(weights_to_bytes(network))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightsFormatError(f"truncated file while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def _build_layer(kind: LayerKind, shape: tuple, prev_conv: LayerKind | None):
    if kind == LayerKind.DENSE:
        return Dense(shape[1], shape[0])
    if kind == LayerKind.CONV1D:
        return Conv1D(shape[1], shape[0], shape[2])
    if kind == LayerKind.CONV2D:
        return Conv2D(shape[1], shape[0], shape[2])
    if kind == LayerKind.PRELU:
        return PReLU(shape[0], channel_axis=1 if prev_conv == LayerKind.CONV2D else -1)
    if kind == LayerKind.MAXPOOL2D:
        return MaxPool2D()
    return Flatten()


def weights_from_bytes(data: bytes, network: Network | None = None) -> Network:
    """Parse a PGNN blob into ``network`` (checked against its architecture), or
    into a freshly built layer stack when no network is given."""
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise WeightsFormatError("bad magic")
    version, count = struct.unpack("<II", r.take(8, "header"))
    if version != VERSION:
        raise WeightsFormatError(f"unsupported version {version}")
    if network is not None and count != len(network.layers):
        raise WeightsFormatError(f"shape mismatch: file has {count} layers, architecture {len(network.layers)}")

    layers = []
    prev_conv = None
    for i in range(count):
        what = f"layer {i}"
        kind_code, rank = struct.unpack("<BB", r.take(2, what))
        try:
            kind = LayerKind(kind_code)
        except ValueError:
            raise WeightsFormatError(f"layer {i}: unknown kind {kind_code}") from None
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank, what))
        if network is not None:
            layer = network.layers[i]
            if layer.kind != kind or tuple(layer.weight_shape()) != tuple(shape):
                raise WeightsFormatError(
                    f"layer {i}: shape mismatch, file {kind.name}{shape} vs "
                    f"architecture {layer.kind.name}{tuple(layer.weight_shape())}")
        else:
            layer = _build_layer(kind, shape, prev_conv)
        for name in layer.param_names:
            p = layer.params[name]
            raw = r.take(4 * p.size, what)
            layer.params[name] = np.frombuffer(raw, dtype="<f4").reshape(p.shape).astype(np.float32)
        layer.zero_grad()
        if kind in (LayerKind.CONV1D, LayerKind.CONV2D, LayerKind.DENSE):
            prev_conv = kind
        layers.append(layer)
    if r.pos != len(data):
        raise WeightsFormatError(f"{len(data) - r.pos} trailing bytes after last layer")
    if network is not None:
        return network
    return Network(layers)


def load_weights(path, network: Network | None = None) -> Network:
    with open(path, "rb") as f:
        return weights_from_bytes(f.read(), network)
