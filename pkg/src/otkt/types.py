"""Value types for discrete optimal transport: distributions, costs, plans.

Instances are validated on construction and their arrays are frozen
(read-only), so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEIGHT_SUM_TOL = 1e-9
MARGINAL_TOL = 1e-6


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteDistribution:
    """Nonnegative weights over a finite support, summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError(f"weights must be a 1-d vector, got shape {w.shape}")
        if w.size < 1:
            raise ValueError("a distribution needs at least one atom")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def support_dim(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, n: int) -> "DiscreteDistribution":
        if n < 1:
            raise ValueError("support size must be at least 1")
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative, finite per-unit transport costs."""

    entries: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.entries, dtype=np.float64)
        if c.ndim != 2:
            raise ValueError(f"cost matrix must be 2-d, got shape {c.shape}")
        if c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("cost matrix must be nonempty")
        if not np.all(np.isfinite(c)):
            raise ValueError("cost entries must be finite")
        if np.any(c < 0):
            raise ValueError("cost entries must be nonnegative")
        object.__setattr__(self, "entries", _freeze(c))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling whose margins match two prescribed distributions.

    `tol` is the marginal tolerance the plan was validated at (solvers pass
    their own convergence tolerance through).
    """

    entries: np.ndarray
    row_marginal: DiscreteDistribution
    col_marginal: DiscreteDistribution
    tol: float = MARGINAL_TOL

    def __post_init__(self):
        t = np.asarray(self.entries, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError(f"plan must be 2-d, got shape {t.shape}")
        n, m = t.shape
        if n != self.row_marginal.support_dim or m != self.col_marginal.support_dim:
            raise ValueError(
                f"plan shape {t.shape} does not match marginals "
                f"({self.row_marginal.support_dim}, {self.col_marginal.support_dim})"
            )
        if not np.all(np.isfinite(t)):
            raise ValueError("plan entries must be finite")
        low = t.min(initial=0.0)
        if low < -1e-12:
            raise ValueError(f"plan entries must be nonnegative, min {low!r}")
        if low < 0.0:
            t = np.maximum(t, 0.0)  # clear roundoff-level negatives
        row_gap = np.abs(t.sum(axis=1) - self.row_marginal.weights).max()
        col_gap = np.abs(t.sum(axis=0) - self.col_marginal.weights).max()
        if row_gap > self.tol:
            raise ValueError(f"row sums violate the marginal by {row_gap!r}")
        if col_gap > self.tol:
            raise ValueError(f"column sums violate the marginal by {col_gap!r}")
        mass = float(t.sum())
        if abs(mass - 1.0) > MARGINAL_TOL:
            raise ValueError(f"total mass must be 1, got {mass!r}")
        object.__setattr__(self, "entries", _freeze(t))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def transport_objective(plan: TransportPlan | np.ndarray, cost: CostMatrix | np.ndarray) -> float:
    """Frobenius inner product between a plan and a cost matrix."""
    t = np.asarray(getattr(plan, "entries", plan), dtype=np.float64)
    c = np.asarray(getattr(cost, "entries", cost), dtype=np.float64)
    if t.shape != c.shape:
        raise ValueError(f"plan shape {t.shape} does not match cost shape {c.shape}")
    return float(np.sum(t * c))
