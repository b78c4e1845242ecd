"""Jacobian of the observability mapping and the rank condition.

For the static system ``w_{t+1} = w_t``, ``y_t = h(w_t, u_t)`` the mapping over
``N`` inputs is the output vector itself, and its Jacobian with respect to the
flattened weights has row ``i`` equal to ``[u_i chi_i1, ..., u_i chi_in]``.
It factors as ``T_u (T_chi kron I_m)`` with ``T_u`` the block diagonal of the
input rows and ``T_chi = indicator(U W)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import block_diag

from .exceptions import FactorizationError, KinkProximityError
from .fnn import as_inputs, as_weights, indicator, output_sequence, _check_compatible

__all__ = [
    "JacobianBundle",
    "RankCondition",
    "default_rel_tol",
    "input_block_matrix",
    "indicator_matrix",
    "jacobian",
    "numerical_rank",
    "rank_condition",
    "jacobian_fd_check",
]

FACTORIZATION_TOL = 1e-12


@dataclass(frozen=True)
class JacobianBundle:
    J: np.ndarray
    T_u: np.ndarray
    T_chi: np.ndarray
    singular_values: np.ndarray
    numerical_rank: int
    rel_tol: float

    @property
    def N(self) -> int:
        return self.J.shape[0]

    @property
    def n_states(self) -> int:
        return self.J.shape[1]

    @property
    def full_column_rank(self) -> bool:
        return self.numerical_rank == self.n_states


class RankCondition(NamedTuple):
    holds: bool
    bundle: JacobianBundle


def default_rel_tol(N: int, n_states: int) -> float:
    return max(N, n_states) * np.finfo(np.float64).eps


def indicator_matrix(state, inputs) -> np.ndarray:
    W = as_weights(state)
    U = as_inputs(inputs)
    _check_compatible(U, W)
    return indicator(U @ W)


def input_block_matrix(inputs) -> np.ndarray:
    """``T_u``: N x (N m) block diagonal with ``u_i^T`` as block ``i``."""
    U = as_inputs(inputs)
    return block_diag(*[row[None, :] for row in U])


def numerical_rank(singular_values, rel_tol: float) -> int:
    """Number of singular values strictly above ``rel_tol * sigma_max``."""
    s = np.asarray(singular_values, dtype=np.float64)
    if s.size == 0:
        return 0
    smax = s.max()
    if smax <= 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * smax))


def _assemble(U, T_chi):
    N, m = U.shape
    n = T_chi.shape[1]
    # block j of row i is u_i * chi_ij
    return (T_chi[:, :, None] * U[:, None, :]).reshape(N, n * m)


def jacobian(state, inputs, rel_tol: float | None = None) -> JacobianBundle:
    W = as_weights(state)
    U = as_inputs(inputs)
    _check_compatible(U, W)
    N, m = U.shape
    n = W.shape[1]

    T_chi = indicator(U @ W)
    J = _assemble(U, T_chi)
    T_u = input_block_matrix(U)

    factored = T_u @ np.kron(T_chi, np.eye(m))
    scale = np.abs(J).max()
    dev = np.abs(J - factored).max()
    if dev > FACTORIZATION_TOL * max(scale, np.finfo(float).tiny):
        raise FactorizationError(
            f"Jacobian deviates from T_u (T_chi kron I_m) by {dev:.3e} (max |J| = {scale:.3e})"
        )

    if rel_tol is None:
        rel_tol = default_rel_tol(N, m * n)
    sv = np.linalg.svd(J, compute_uv=False)
    J.setflags(write=False)
    return JacobianBundle(
        J=J,
        T_u=T_u,
        T_chi=T_chi,
        singular_values=sv,
        numerical_rank=numerical_rank(sv, rel_tol),
        rel_tol=float(rel_tol),
    )


def rank_condition(state, inputs, rel_tol: float | None = None) -> RankCondition:
    """Full column rank (= m n) of the observability Jacobian."""
    bundle = jacobian(state, inputs, rel_tol=rel_tol)
    return RankCondition(bundle.full_column_rank, bundle)


def jacobian_fd_check(state, inputs, h: float = 1e-6) -> float:
    """Max entrywise gap between the analytic Jacobian and central differences.

    Every pre-activation must satisfy ``|w_j . u_i| > 2h`` so that no difference
    stencil crosses a ReLU kink.
    """
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    W = as_weights(state)
    U = as_inputs(inputs)
    _check_compatible(U, W)
    m, n = W.shape

    pre = U @ W
    close = np.argwhere(np.abs(pre) <= 2 * h)
    if close.size:
        i, j = (int(v) for v in close[0])
        raise KinkProximityError(
            f"pre-activation w_{j + 1}.u_{i + 1} = {pre[i, j]:.3e} is within 2h = {2 * h:.1e} of the kink",
            pair=(i, j),
        )

    w = W.flatten(order="F")
    J_fd = np.empty((U.shape[0], m * n))
    for k in range(m * n):
        e = np.zeros_like(w)
        e[k] = h
        plus = output_sequence((w + e).reshape((m, n), order="F"), U)
        minus = output_sequence((w - e).reshape((m, n), order="F"), U)
        J_fd[:, k] = (plus - minus) / (2 * h)
    J = _assemble(U, indicator(pre))
    return float(np.abs(J - J_fd).max())
