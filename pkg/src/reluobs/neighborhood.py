"""Weight states excited by the same persistently exciting input.

A state ``W' = W + delta`` is excited by ``U`` whenever ``U delta = K o (U W)``
for a gain matrix ``K`` with every entry in ``(-1, inf)``: each pre-activation
is rescaled by a positive factor ``1 + K_ij``, so the activation pattern and
the rank condition carry over from ``W``.  Candidates are computed as the
least-squares solution ``delta = pinv(U) (K o U W)`` and kept only if the
equation holds exactly (up to a scale-aware tolerance).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular

from .exceptions import DimensionError, RankDeficientError
from .fnn import as_inputs, as_weights, indicator, _check_compatible
from .observability import default_rel_tol, numerical_rank, rank_condition

__all__ = [
    "NeighborSample",
    "Neighborhood",
    "sample_K",
    "sample_consistent_K",
    "validate_K",
    "compute_delta",
    "verify_tolerance",
    "verify_neighbor",
    "generate_neighborhood",
    "DEFAULT_SPREAD",
    "DEFAULT_FLOOR",
]

log = logging.getLogger(__name__)

DEFAULT_SPREAD = 2.0
DEFAULT_FLOOR = 0.01
VERIFY_REL_TOL = 1e-8


@dataclass(frozen=True)
class NeighborSample:
    K: np.ndarray
    delta: np.ndarray
    W_prime: np.ndarray
    residual: float
    consistent: bool
    pattern_preserved: bool
    rank_ok: bool
    rank: int
    index: int = 0

    @property
    def verified(self) -> bool:
        return self.consistent and self.pattern_preserved and self.rank_ok

    @property
    def delta_max(self) -> float:
        return float(np.abs(self.delta).max())


@dataclass
class Neighborhood:
    samples: list[NeighborSample]
    requested: int
    attempts: int
    sampler: str
    rejections: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return len(self.samples) / self.attempts if self.attempts else 1.0

    @property
    def exhausted(self) -> bool:
        return len(self.samples) < self.requested


def validate_K(K) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    if not np.all(np.isfinite(K)):
        raise ValueError("K contains NaN or infinite entries")
    bad = np.argwhere(K <= -1)
    if bad.size:
        i, j = bad[0]
        raise ValueError(f"K[{i}, {j}] = {K[i, j]} is not in (-1, inf)")
    return K


def _box(spread, floor):
    if not spread > 0:
        raise ValueError(f"spread must be positive, got {spread}")
    if not floor > 0:
        raise ValueError(f"floor must be positive, got {floor}")
    return -1.0 + floor, -1.0 + floor + spread


def sample_K(N: int, n: int, spread: float = DEFAULT_SPREAD, seed=None,
             floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """I.i.d. uniform gains in ``[-1 + floor, -1 + floor + spread)``.

    Such a ``K`` is almost never consistent with ``U delta = K o U W`` once
    ``N > m``; see :func:`sample_consistent_K` for the sampler used to build
    neighborhoods.
    """
    lo, hi = _box(spread, floor)
    return np.random.default_rng(seed).uniform(lo, hi, size=(N, n))


def sample_consistent_K(inputs, state, spread: float = DEFAULT_SPREAD, seed=None,
                        floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Gains drawn from the set of ``K`` for which ``U delta = K o U W`` is solvable.

    That set is ``{(U G) / (U W) : G}``, which contains every constant matrix.
    The draw is ``K = c + s * D / max|D|`` with ``c`` the centre of the box
    ``(-1 + floor, -1 + floor + spread)``, ``D = (U G) / (U W)`` for a Gaussian
    ``G`` and ``s`` uniform within the box half-width, so every entry stays in
    the box.
    """
    U = as_inputs(inputs)
    W = as_weights(state)
    _check_compatible(U, W)
    lo, hi = _box(spread, floor)
    UW = U @ W
    if np.any(UW == 0):
        raise ValueError("U W has zero entries; consistent gains are undefined there")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal(W.shape)
    D = (U @ G) / UW
    centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    s = rng.uniform(-half, half)
    return centre + s * D / np.abs(D).max()


def compute_delta(inputs, state, K) -> np.ndarray:
    """Least-squares ``delta`` for ``U delta = K o (U W)`` via a thin QR of ``U``."""
    U = as_inputs(inputs)
    W = as_weights(state)
    _check_compatible(U, W)
    K = validate_K(K)
    if K.shape != (U.shape[0], W.shape[1]):
        raise DimensionError(f"K has shape {K.shape}, expected {(U.shape[0], W.shape[1])}")
    sv = np.linalg.svd(U, compute_uv=False)
    r = numerical_rank(sv, default_rel_tol(*U.shape))
    if r < U.shape[1]:
        raise RankDeficientError(f"U has rank {r} < {U.shape[1]} columns; delta is not unique")
    Q, R = qr(U, mode="economic")
    return solve_triangular(R, Q.T @ (K * (U @ W)))


def verify_tolerance(inputs, state) -> float:
    U = as_inputs(inputs)
    W = as_weights(state)
    return VERIFY_REL_TOL * max(1.0, float(np.abs(U @ W).max()))


def verify_neighbor(inputs, state, K, delta, rel_tol: float | None = None,
                    index: int = 0) -> NeighborSample:
    U = as_inputs(inputs)
    W = as_weights(state)
    _check_compatible(U, W)
    K = np.asarray(K, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != W.shape:
        raise DimensionError(f"delta has shape {delta.shape}, W has shape {W.shape}")

    UW = U @ W
    residual = float(np.abs(U @ delta - K * UW).max())
    consistent = bool(np.all(K > -1)) and residual <= verify_tolerance(U, W)

    W_prime = W + delta
    pattern_preserved = bool(np.array_equal(indicator(U @ W_prime), indicator(UW)))
    holds, bundle = rank_condition(W_prime, U, rel_tol=rel_tol)
    return NeighborSample(
        K=K, delta=delta, W_prime=W_prime, residual=residual,
        consistent=consistent, pattern_preserved=pattern_preserved,
        rank_ok=bool(holds), rank=bundle.numerical_rank, index=index,
    )


def generate_neighborhood(inputs, state, count: int, spread: float = DEFAULT_SPREAD,
                          seed: int = 0, sampler: str = "consistent",
                          floor: float = DEFAULT_FLOOR, rel_tol: float | None = None,
                          max_attempts: int | None = None) -> Neighborhood:
    """Collect ``count`` verified neighbors of ``W`` under ``U``.

    Attempt ``t`` draws its gains from ``default_rng([seed, t])`` so that any
    sample can be regenerated on its own.  Unverified candidates are discarded.
    When the attempt budget runs out the partial result is returned with
    ``exhausted`` set.
    """
    U = as_inputs(inputs)
    W = as_weights(state)
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if sampler not in ("consistent", "iid"):
        raise ValueError(f"unknown sampler {sampler!r}")
    holds, bundle = rank_condition(W, U, rel_tol=rel_tol)
    if not holds:
        raise RankDeficientError(
            f"rank condition fails at W (rank {bundle.numerical_rank} < {bundle.n_states})"
        )
    if max_attempts is None:
        max_attempts = max(100, 10 * count)

    N, n = U.shape[0], W.shape[1]
    samples = []
    rejections = {"inconsistent": 0, "pattern": 0, "rank": 0}
    attempts = 0
    while len(samples) < count and attempts < max_attempts:
        entropy = [seed, attempts]
        if sampler == "consistent":
            K = sample_consistent_K(U, W, spread, seed=entropy, floor=floor)
        else:
            K = sample_K(N, n, spread, seed=entropy, floor=floor)
        attempts += 1
        delta = compute_delta(U, W, K)
        s = verify_neighbor(U, W, K, delta, rel_tol=rel_tol, index=len(samples))
        if s.verified:
            samples.append(s)
            continue
        if not s.consistent:
            rejections["inconsistent"] += 1
        elif not s.pattern_preserved:
            rejections["pattern"] += 1
        else:
            rejections["rank"] += 1

    result = Neighborhood(samples, count, attempts, sampler, rejections)
    if result.exhausted:
        log.warning(
            "neighborhood budget exhausted: %d/%d verified after %d attempts (%s)",
            len(samples), count, attempts, rejections,
        )
    return result
