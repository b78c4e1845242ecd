"""Two-layer ReLU network with unit output weights.

The network maps ``u`` in R^m to ``h(W, u) = sum_j relu(w_j . u)`` where
``w_j`` is column ``j`` of the ``m x n`` weight matrix ``W``.  The weights are
the state of a static system; the flattened state stacks the columns of ``W``
(``w_1`` first), i.e. Fortran order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError

__all__ = [
    "WeightState",
    "InputSequence",
    "relu",
    "relu_derivative",
    "indicator",
    "forward",
    "output_sequence",
    "as_weights",
    "as_inputs",
]


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightState:
    """Weight matrix ``W`` (m input nodes x n hidden nodes)."""

    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim != 2 or W.size == 0:
            raise DimensionError(f"W must be a non-empty 2-D matrix, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("W contains NaN or infinite entries")
        object.__setattr__(self, "W", _readonly(W))

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def n(self) -> int:
        return self.W.shape[1]

    @property
    def w(self) -> np.ndarray:
        """Flattened state ``(w_1; w_2; ...; w_n)``."""
        return self.W.flatten(order="F")

    @classmethod
    def from_vector(cls, w, m: int, n: int) -> "WeightState":
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (m * n,):
            raise DimensionError(f"state vector has shape {w.shape}, expected ({m * n},)")
        return cls(w.reshape((m, n), order="F"))


@dataclass(frozen=True)
class InputSequence:
    """Stacked inputs ``U`` with one input ``u_i`` per row (N x m)."""

    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=np.float64)
        if U.ndim == 1:
            U = U[:, None]
        if U.ndim != 2 or U.size == 0:
            raise DimensionError(f"U must be a non-empty 2-D matrix, got shape {U.shape}")
        if not np.all(np.isfinite(U)):
            raise ValueError("U contains NaN or infinite entries")
        object.__setattr__(self, "U", _readonly(U))

    @property
    def N(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[1]

    def __len__(self):
        return self.N

    def __iter__(self):
        return iter(self.U)


def as_weights(state) -> np.ndarray:
    if isinstance(state, WeightState):
        return state.W
    return WeightState(state).W


def as_inputs(inputs) -> np.ndarray:
    if isinstance(inputs, InputSequence):
        return inputs.U
    return InputSequence(inputs).U


def _check_compatible(U, W):
    if U.shape[1] != W.shape[0]:
        raise DimensionError(
            f"inputs have {U.shape[1]} entries per row but W has m={W.shape[0]} input nodes"
        )


def relu(a):
    return np.maximum(0.0, a)


def relu_derivative(a):
    """0 for ``a <= 0`` (the kink included), 1 for ``a > 0``."""
    return np.where(np.asarray(a) > 0, 1.0, 0.0)[()]


def indicator(a):
    """Activation indicator, entrywise: 1 where ``a > 0`` else 0 (integer dtype)."""
    return (np.asarray(a) > 0).astype(np.int64)[()]


def forward(state, u) -> float:
    W = as_weights(state)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape[0] != W.shape[0]:
        raise DimensionError(f"input has length {u.shape[0]}, W expects m={W.shape[0]}")
    return float(relu(u @ W).sum())


def output_sequence(state, inputs) -> np.ndarray:
    """Outputs ``y_i = h(W, u_i)`` for every row of ``U``."""
    W = as_weights(state)
    U = as_inputs(inputs)
    _check_compatible(U, W)
    return relu(U @ W).sum(axis=1)
