"""Simulation of a robot catching a thrown soft object with camera and radar sensing.

Subpackages: ``nn`` (numpy layers, Adam, gradient checks, weight files),
``models`` (the two networks, datasets, training) and ``harness`` (episodes,
experiments, CLI). The physics and sensing live in ``ballistics``,
``sensors``, ``scenario``, ``baseline`` and ``controller``.
"""

__version__ = "0.1.0"
