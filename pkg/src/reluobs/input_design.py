"""Persistently exciting inputs for square (m = n) networks.

A design template is a pair ``(T, B)``: a non-singular 0/1 pattern ``T`` and a
stack of ``n`` full-rank ``n x n`` blocks ``B_k`` whose sign pattern is row ``k``
of ``T`` repeated on every row, i.e. ``indicator(B) = T kron 1_n``.  For a
non-singular ``W`` the input ``U = B W^{-1}`` then gives ``U W = B`` and a
full-column-rank observability Jacobian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .exceptions import BudgetExhaustedError, DesignError, DimensionError, SingularWeightsError
from .fnn import InputSequence, as_weights, indicator
from .observability import numerical_rank, rank_condition

__all__ = [
    "DesignTemplate",
    "TemplateCheck",
    "pattern_kron",
    "canonical_B",
    "is_valid_T",
    "sample_T",
    "sample_B",
    "validate_template",
    "design_input",
    "design_with_template",
    "perturb_zeros",
    "DEFAULT_MAGNITUDE_RANGE",
]

DEFAULT_MAGNITUDE_RANGE = (0.1, 1.0)
BLOCK_ATTEMPTS = 100
RESIDUAL_TOL = 1e-8
ZERO_MARGIN = 1e-3

log = logging.getLogger(__name__)


def _rank(M) -> int:
    M = np.asarray(M, dtype=np.float64)
    sv = np.linalg.svd(M, compute_uv=False)
    return numerical_rank(sv, max(M.shape) * np.finfo(np.float64).eps)


def pattern_kron(T) -> np.ndarray:
    """``T kron 1_n``: row ``k`` of ``T`` repeated ``n`` times, block after block."""
    T = np.asarray(T)
    return np.kron(T, np.ones((T.shape[1], 1), dtype=T.dtype))


@dataclass(frozen=True)
class DesignTemplate:
    T: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        T = np.array(self.T, dtype=np.int64, copy=True)
        B = np.array(self.B, dtype=np.float64, copy=True)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise DimensionError(f"T must be square, got shape {T.shape}")
        n = T.shape[0]
        if B.shape != (n * n, n):
            raise DimensionError(f"B must have shape ({n * n}, {n}) for n={n}, got {B.shape}")
        T.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def block(self, k: int) -> np.ndarray:
        """Block ``B_k`` with zero-based ``k``."""
        n = self.n
        return self.B[k * n:(k + 1) * n]

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.block(k) for k in range(self.n)]


@dataclass(frozen=True)
class TemplateCheck:
    valid: bool
    reason: str | None = None
    condition: str | None = None  # "T", "rank" or "indicator"

    def __bool__(self):
        return self.valid


def canonical_B(n: int) -> DesignTemplate:
    """Template with ``T = I_n``: block ``k`` has column ``k`` all ones and -1 on the rest of the diagonal."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    blocks = []
    for k in range(n):
        Bk = -np.eye(n)
        Bk[:, k] = 1.0
        blocks.append(Bk)
    return DesignTemplate(np.eye(n, dtype=np.int64), np.vstack(blocks))


def is_valid_T(T) -> bool:
    T = np.asarray(T)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        return False
    if not np.all((T == 0) | (T == 1)):
        return False
    return _rank(T) == T.shape[0]


def sample_T(n: int, seed=None, budget: int = 1000) -> np.ndarray:
    """Random non-singular 0/1 matrix with i.i.d. fair-coin entries."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    for _ in range(budget):
        T = rng.integers(0, 2, size=(n, n))
        if is_valid_T(T):
            return T.astype(np.int64)
    raise BudgetExhaustedError(
        f"no non-singular 0/1 matrix of size {n} found in {budget} draws",
        {"n": n, "budget": budget},
    )


def sample_B(T, magnitude_range=DEFAULT_MAGNITUDE_RANGE, seed=None,
             attempts: int = BLOCK_ATTEMPTS) -> DesignTemplate:
    """Random template for pattern ``T``.

    Entries of ``B_k`` have magnitude uniform in ``[lo, hi]``, positive where
    ``T[k, j] = 1`` and strictly negative where ``T[k, j] = 0``.  Blocks are
    redrawn until non-singular.
    """
    T = np.asarray(T)
    if not is_valid_T(T):
        raise DesignError("T must be a non-singular 0/1 square matrix")
    lo, hi = (float(v) for v in magnitude_range)
    if not 0 < lo < hi:
        raise ValueError(f"magnitude range must satisfy 0 < lo < hi, got ({lo}, {hi})")
    n = T.shape[0]
    rng = np.random.default_rng(seed)

    blocks = []
    for k in range(n):
        signs = np.where(T[k] == 1, 1.0, -1.0)
        for _ in range(attempts):
            Bk = rng.uniform(lo, hi, size=(n, n)) * signs
            if _rank(Bk) == n:
                break
        else:
            raise BudgetExhaustedError(
                f"block B_{k + 1} stayed singular after {attempts} draws",
                {"block": k + 1, "singular_values": np.linalg.svd(Bk, compute_uv=False).tolist()},
            )
        blocks.append(Bk)

    tpl = DesignTemplate(T, np.vstack(blocks))
    check = validate_template(tpl)
    if not check:
        raise DesignError(f"sampled template failed validation: {check.reason}")
    return tpl


def validate_template(tpl: DesignTemplate) -> TemplateCheck:
    T, n = tpl.T, tpl.n
    if not is_valid_T(T):
        return TemplateCheck(False, "T is not a non-singular 0/1 matrix", "T")
    for k, Bk in enumerate(tpl.blocks):
        r = _rank(Bk)
        if r != n:
            return TemplateCheck(False, f"block B_{k + 1} has rank {r} < {n}", "rank")
    mismatch = np.argwhere(indicator(tpl.B) != pattern_kron(T))
    if mismatch.size:
        i, j = mismatch[0]
        return TemplateCheck(
            False,
            f"indicator(B)[{i}, {j}] does not match T kron 1_n (row {i} lies in block B_{i // n + 1})",
            "indicator",
        )
    return TemplateCheck(True)


def perturb_zeros(tpl: DesignTemplate, margin: float = ZERO_MARGIN) -> DesignTemplate:
    """Move exact zeros of ``B`` to ``-margin * max|B|``.

    Zeros already map to an inactive unit, so the pattern is unchanged, but
    after the solve ``U W`` only reproduces them up to roundoff, which can
    land on either side of the kink.
    """
    B = tpl.B.copy()
    B[B == 0] = -margin * np.abs(B).max()
    return DesignTemplate(tpl.T, B)


def _solve(W, tpl, rel_tol, cond):
    # U W = B  <=>  W^T U^T = B^T
    U = lu_solve(lu_factor(W.T), tpl.B.T).T
    B = tpl.B
    residual = float(np.abs(U @ W - B).max())
    if residual >= RESIDUAL_TOL * np.abs(B).max():
        raise DesignError(
            f"solve residual ||UW - B||_max = {residual:.3e} too large (cond(W) = {cond:.3e})"
        )
    if not np.array_equal(indicator(U @ W), pattern_kron(tpl.T)):
        raise DesignError(
            f"activation pattern of U W differs from T kron 1_n "
            f"(||UW - B||_max = {residual:.3e}, cond(W) = {cond:.3e})"
        )
    inputs = InputSequence(U)
    holds, bundle = rank_condition(W, inputs, rel_tol=rel_tol)
    if not holds:
        raise DesignError(
            f"designed input fails the rank condition: rank {bundle.numerical_rank} < {W.size} "
            f"(cond(W) = {cond:.3e})"
        )
    return inputs


def design_with_template(state, tpl: DesignTemplate, rel_tol: float | None = None):
    """Like :func:`design_input` but also returns the template actually used.

    A template with exact zeros in ``B`` is tried as given first; if roundoff
    in ``U W`` breaks the activation pattern, it is retried once with the
    zeros pushed slightly negative (:func:`perturb_zeros`).
    """
    W = as_weights(state)
    m, n = W.shape
    if m != n:
        raise DesignError(f"input design needs a square W (m = n), got m={m}, n={n}")
    if tpl.n != n:
        raise DimensionError(f"template is for n={tpl.n}, W has n={n}")
    check = validate_template(tpl)
    if not check:
        raise DesignError(f"invalid template: {check.reason}")

    sv = np.linalg.svd(W, compute_uv=False)
    r = numerical_rank(sv, n * np.finfo(np.float64).eps)
    if r < n:
        raise SingularWeightsError(
            f"W is singular: numerical rank {r} < {n} (singular values {sv.tolist()})"
        )
    cond = sv[0] / sv[-1]

    try:
        return _solve(W, tpl, rel_tol, cond), tpl
    except DesignError:
        if not np.any(tpl.B == 0):
            raise
    shifted = perturb_zeros(tpl)
    check = validate_template(shifted)
    if not check:
        raise DesignError(f"zero-shifted template is invalid: {check.reason}")
    log.info("zero entries of B shifted to %.3g to keep U W off the kink", shifted.B[tpl.B == 0][0])
    return _solve(W, shifted, rel_tol, cond), shifted


def design_input(state, tpl: DesignTemplate, rel_tol: float | None = None) -> InputSequence:
    """Input ``U = B W^{-1}`` obtained from an LU solve against ``W^T``.

    The result is checked before it is returned: ``U W`` reproduces ``B``,
    its activation pattern is exactly ``T kron 1_n`` and the rank condition
    holds at ``W``.
    """
    return design_with_template(state, tpl, rel_tol)[0]
