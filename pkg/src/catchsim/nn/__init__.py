"""Small numpy neural-network core: layers, MSE, Adam, gradient checks, PGNN weights."""

from .gradcheck import GradCheckReport, gradient_check
from .layers import (BackwardBeforeForwardError, Conv1D, Conv2D, Dense, Flatten, Layer, LayerKind,
                     MaxPool2D, PReLU)
from .network import Network, mse_loss
from .optim import Adam, AdamState, DivergenceError, adam_step
from .serialize import WeightsFormatError, load_weights, save_weights, weights_from_bytes, weights_to_bytes

__all__ = [
    "Adam", "AdamState", "BackwardBeforeForwardError", "Conv1D", "Conv2D", "Dense", "DivergenceError",
    "Flatten", "GradCheckReport", "Layer", "LayerKind", "MaxPool2D", "Network", "PReLU",
    "WeightsFormatError", "adam_step", "gradient_check", "load_weights", "mse_loss", "save_weights",
    "weights_from_bytes", "weights_to_bytes",
]
