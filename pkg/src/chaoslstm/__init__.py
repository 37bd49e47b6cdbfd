"""Tensorized LSTM forecasting of chaotic time series.

The package covers the full pipeline: chaotic-system data generation,
tensor-network cell-state propagation (full / MPS / MERA), training with
backpropagation through time, multi-step rollout and entanglement-entropy
analysis of the learned propagation tensors.
"""

__version__ = "0.1.0"

from . import autodiff, cells, cli, dynamics, tensor, tn, training  # noqa: F401
