from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..nn import Adam, DivergenceError, Network, mse_loss

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    network: Network
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)


def evaluate_loss(network: Network, X, y, batch_size: int = 256) -> float:
    total, n = 0.0, len(X)
    for i in range(0, n, batch_size):
        pred = network.forward(X[i:i + batch_size])
        loss, _ = mse_loss(pred, y[i:i + batch_size])
        total += loss * len(pred)
    return total / n


def train(network: Network, X, y, *, epochs: int = 200, lr: float = 1e-4, batch_size: int = 32, seed=0,
          X_val=None, y_val=None, log_every: int = 0) -> TrainResult:
    """Mini-batch Adam on MSE with a seeded shuffle each epoch.

    The returned losses are per-epoch means over the training batches
    (and the full validation set, when given).
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.float32)
    if len(X) == 0:
        raise ValueError("empty training set")
    if len(X) != len(y):
        raise ValueError("X and y differ in length")
    rng = np.random.default_rng(seed)
    opt = Adam(network, lr=lr)
    result = TrainResult(network)
    n = len(X)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, batch_size):
            idx = order[i:i + batch_size]
            network.zero_grad()
            pred = network.forward(X[idx])
            loss, grad = mse_loss(pred, y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            network.backward(grad, input_grad=False)
            try:
                opt.step()
            except DivergenceError as e:
                raise DivergenceError(f"{e} at epoch {epoch}") from None
            total += loss * len(idx)
        result.train_loss.append(total / n)
        if X_val is not None and len(X_val):
            result.val_loss.append(evaluate_loss(network, np.asarray(X_val), np.asarray(y_val, np.float32)))
        if log_every and (epoch + 1) % log_every == 0:
            val = f" val={result.val_loss[-1]:.5g}" if result.val_loss else ""
            log.info("epoch %d train=%.5g%s", epoch + 1, result.train_loss[-1], val)
    return result
