"""Cosine cost matrices between feature clouds, and their feature gradient."""

from __future__ import annotations

import numpy as np

from .types import CostMatrix


def _unit_rows(features: np.ndarray, side: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"{side} feature matrix must be 2-d, got shape {x.shape}")
    if x.shape[1] < 1:
        raise ValueError("feature dimension must be at least 1")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{side} feature matrix has non-finite entries")
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(
            f"row {int(zero[0])} of the {side} feature matrix has zero norm; "
            "cosine cost is undefined"
        )
    return x / norms[:, None], norms


def cosine_cost(feats_a: np.ndarray, feats_b: np.ndarray) -> CostMatrix:
    """Pairwise 1 - cos(a_i, b_j); entries lie in [0, 2]."""
    unit_a, _ = _unit_rows(feats_a, "first")
    unit_b, _ = _unit_rows(feats_b, "second")
    if unit_a.shape[1] != unit_b.shape[1]:
        raise ValueError(
            f"feature dimensions differ: {unit_a.shape[1]} vs {unit_b.shape[1]}"
        )
    entries = 1.0 - unit_a @ unit_b.T
    np.clip(entries, 0.0, 2.0, out=entries)  # clear roundoff outside [0, 2]
    return CostMatrix(entries)


def gradient_wrt_features(plan, feats_a: np.ndarray, feats_b: np.ndarray) -> np.ndarray:
    """Gradient of <T, cosine_cost(A, B)> with respect to A, at fixed T.

    This is the envelope gradient of an optimal-transport cost: the plan is
    held constant while the costs move with the features. Accepts a
    TransportPlan or a bare matrix (useful for degenerate test inputs).
    """
    t = np.asarray(getattr(plan, "entries", plan), dtype=np.float64)
    unit_a, norms_a = _unit_rows(feats_a, "first")
    unit_b, _ = _unit_rows(feats_b, "second")
    if t.shape != (unit_a.shape[0], unit_b.shape[0]):
        raise ValueError(
            f"plan shape {t.shape} does not match feature counts "
            f"({unit_a.shape[0]}, {unit_b.shape[0]})"
        )
    cosines = unit_a @ unit_b.T
    # d/dA_i of (1 - cos) summed over j with weights t_ij:
    #   -(sum_j t_ij unit_b_j - (sum_j t_ij cos_ij) unit_a_i) / ||A_i||
    weighted_b = t @ unit_b
    along_a = (t * cosines).sum(axis=1, keepdims=True) * unit_a
    return -(weighted_b - along_a) / norms_a[:, None]
