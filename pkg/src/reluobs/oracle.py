"""Brute-force ground truth at desk scale.

Everything here works by evaluating the network on explicit input grids, with
no Jacobians involved, so it can independently check the rank-based results.
Agreement on a grid is a certificate for the grid only.  The exception is
``m = 1``: every activation breakpoint sits at ``u = 0`` and the network is
positively homogeneous, so agreement at one point on each side of zero is
conclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, GridCapError
from .fnn import InputSequence, as_weights, indicator, output_sequence

__all__ = [
    "SweepGrid",
    "SweepResult",
    "Example1Result",
    "scalar_witness",
    "example1_oracle",
    "pattern_census",
    "sweep_distinguish",
    "refines_breakpoints",
    "GRID_CAP",
    "IDENTICAL_TOL",
]

GRID_CAP = 10**6
IDENTICAL_TOL = 1e-12


@dataclass(frozen=True)
class SweepGrid:
    """Tensor grid with ``resolution`` points per dimension over ``ranges``."""

    ranges: tuple
    resolution: int
    cap: int = GRID_CAP

    def __post_init__(self):
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        if not ranges:
            raise ValueError("grid needs at least one dimension")
        for lo, hi in ranges:
            if not lo < hi:
                raise ValueError(f"range ({lo}, {hi}) is empty")
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        object.__setattr__(self, "ranges", ranges)
        if self.size > self.cap:
            raise GridCapError(f"grid has {self.size} points, cap is {self.cap}")

    @classmethod
    def cube(cls, m: int, lo: float, hi: float, resolution: int, cap: int = GRID_CAP):
        return cls(((lo, hi),) * m, resolution, cap)

    @property
    def m(self) -> int:
        return len(self.ranges)

    @property
    def size(self) -> int:
        return self.resolution ** self.m

    def points(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, self.resolution) for lo, hi in self.ranges]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)


@dataclass(frozen=True)
class SweepResult:
    identical: bool
    max_abs_diff: float
    u: np.ndarray | None  # input with the largest output gap, None when identical
    points_checked: int

    def __str__(self):
        if self.identical:
            return f"identical on {self.points_checked} grid points (grid certificate, not a proof)"
        return f"differ at u={self.u.tolist()} with |dy|={self.max_abs_diff:.3e}"


@dataclass(frozen=True)
class Example1Result:
    weights: np.ndarray
    witness: np.ndarray
    indistinguishable: bool
    sweep: SweepResult
    refines_breakpoints: bool
    sign_case: str

    @property
    def conclusive(self) -> bool:
        return self.refines_breakpoints


def _grid_points(grid, m: int) -> np.ndarray:
    if isinstance(grid, SweepGrid):
        pts = grid.points()
    elif isinstance(grid, InputSequence):
        pts = grid.U
    else:
        pts = np.asarray(grid, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] > GRID_CAP:
            raise GridCapError(f"{pts.shape[0]} points exceed the cap of {GRID_CAP}")
    if pts.shape[1] != m:
        raise DimensionError(f"grid points have dimension {pts.shape[1]}, network expects m={m}")
    return pts


def refines_breakpoints(grid, m: int = 1) -> bool:
    """True when a 1-D grid has points strictly on both sides of the breakpoint at 0."""
    if m != 1:
        return False
    pts = _grid_points(grid, 1)[:, 0]
    return bool(np.any(pts < 0) and np.any(pts > 0))


def scalar_witness(weights) -> np.ndarray | None:
    """A different single-input network with identical outputs, or None.

    Two same-signed weights ``p, q`` only ever act together, contributing
    ``(p + q) u`` on one half-line, so any same-signed split of ``p + q`` is
    indistinguishable.  Returns None when no two weights share a sign.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if np.any(w == 0):
        raise ValueError("weights must be nonzero")
    signs = np.sign(w)
    for i in range(len(w)):
        for j in range(i + 1, len(w)):
            if signs[i] == signs[j]:
                p, q = w[i], w[j]
                out = w.copy()
                if p != q:
                    out[i] = out[j] = 0.5 * (p + q)
                else:
                    out[i], out[j] = 1.5 * p, 0.5 * p
                return out
    return None


def sweep_distinguish(state_a, state_b, grid, tol: float = IDENTICAL_TOL) -> SweepResult:
    Wa = as_weights(state_a)
    Wb = as_weights(state_b)
    if Wa.shape != Wb.shape:
        raise DimensionError(f"states have shapes {Wa.shape} and {Wb.shape}")
    pts = _grid_points(grid, Wa.shape[0])
    gap = np.abs(output_sequence(Wa, pts) - output_sequence(Wb, pts))
    k = int(np.argmax(gap))
    worst = float(gap[k])
    if worst <= tol:
        return SweepResult(True, worst, None, len(pts))
    return SweepResult(False, worst, pts[k].copy(), len(pts))


def example1_oracle(a: float, b: float, c: float, grid=None, witness=None) -> Example1Result:
    """Single-input, three-node network: exhibit (or test) an indistinguishable twin.

    Without ``witness`` a twin is constructed by :func:`scalar_witness`; with
    it, the supplied candidate is checked instead.
    """
    w = np.array([a, b, c], dtype=np.float64)
    if np.any(w == 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"weights must be finite and nonzero, got {w.tolist()}")
    if grid is None:
        grid = SweepGrid(((-2.0, 2.0),), 401)
    if witness is None:
        witness = scalar_witness(w)
    witness = np.asarray(witness, dtype=np.float64).reshape(-1)

    sweep = sweep_distinguish(w[None, :], witness[None, :], grid)
    distinct = not np.array_equal(witness, w)
    sign_case = "same" if len(set(np.sign(w))) == 1 else "mixed"
    return Example1Result(
        weights=w,
        witness=witness,
        indistinguishable=sweep.identical and distinct,
        sweep=sweep,
        refines_breakpoints=refines_breakpoints(grid, 1),
        sign_case=sign_case,
    )


def pattern_census(state, grid) -> set[tuple[int, ...]]:
    """Distinct activation rows ``indicator(u^T W)`` reached over the grid."""
    W = as_weights(state)
    pts = _grid_points(grid, W.shape[0])
    rows = np.unique(indicator(pts @ W), axis=0)
    return {tuple(int(v) for v in r) for r in rows}
