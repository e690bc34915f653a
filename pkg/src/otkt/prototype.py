"""Correlation prototype bank: momentum-accumulated class association weights.

One row per target class, one column per source class. Rows live in
normalized space (each sums to one); plan rows are rescaled by the batch
size before mixing so both sides share that scale. Updates happen during
training only; re-weighting serves inference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-6


@dataclass
class CorrelationPrototype:
    """Mutable association weights; writers must be externally serialized."""

    rows: np.ndarray
    alpha: float
    nu: float

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError(f"prototype must be a nonempty 2-d matrix, got {rows.shape}")
        if np.any(rows < 0):
            raise ValueError("prototype entries must be nonnegative")
        gaps = np.abs(rows.sum(axis=1) - 1.0)
        if gaps.max() > ROW_SUM_TOL:
            raise ValueError(f"prototype rows must sum to 1, worst gap {gaps.max()!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.nu < 0.0:
            raise ValueError("nu must be nonnegative")
        self.rows = rows

    @classmethod
    def initialize(cls, num_target: int, num_source: int, alpha: float, nu: float):
        """Uniform rows, so every class association starts indifferent."""
        rows = np.full((num_target, num_source), 1.0 / num_source)
        return cls(rows=rows, alpha=alpha, nu=nu)

    @property
    def num_target(self) -> int:
        return self.rows.shape[0]

    @property
    def num_source(self) -> int:
        return self.rows.shape[1]

    def copy(self) -> "CorrelationPrototype":
        return CorrelationPrototype(self.rows.copy(), self.alpha, self.nu)


def _normalized_rows(plan) -> np.ndarray:
    entries = np.asarray(getattr(plan, "entries", plan), dtype=np.float64)
    if entries.ndim != 2:
        raise ValueError("plan must be 2-d")
    return entries / entries.sum(axis=1, keepdims=True)


def momentum_update(proto: CorrelationPrototype, plan, labels) -> CorrelationPrototype:
    """Blend each present class's mean normalized plan row into its prototype row.

    Classes absent from the batch are untouched (their batch mean is
    undefined). Rows stay on the simplex: the update is a convex combination
    of simplex points.
    """
    labels = np.asarray(labels)
    normalized = _normalized_rows(plan)
    if labels.shape != (normalized.shape[0],):
        raise ValueError("labels must have one entry per plan row")
    if normalized.shape[1] != proto.num_source:
        raise ValueError(
            f"plan has {normalized.shape[1]} columns, prototype has {proto.num_source}"
        )
    if np.any(labels < 0) or np.any(labels >= proto.num_target):
        raise ValueError(f"labels must lie in [0, {proto.num_target})")
    for cls in np.unique(labels):
        batch_mean = normalized[labels == cls].mean(axis=0)
        proto.rows[cls] = proto.alpha * proto.rows[cls] + (1.0 - proto.alpha) * batch_mean
    return proto


def nearest_prototype_row(proto: CorrelationPrototype, plan_row: np.ndarray) -> int:
    """Index of the prototype row closest (L2, normalized space) to the plan row.

    Ties break toward the lowest class index.
    """
    row = np.asarray(plan_row, dtype=np.float64)
    if row.shape != (proto.num_source,):
        raise ValueError(f"plan row must have length {proto.num_source}")
    normalized = row / row.sum()
    dists = np.linalg.norm(proto.rows - normalized, axis=1)
    return int(np.argmin(dists))


def reweight(
    proto: CorrelationPrototype,
    plan,
    fixed_sigma: float | None = None,
    scale: int | None = None,
) -> np.ndarray:
    """Blend each plan row with its nearest prototype row, by row sharpness.

    A row's raw standard deviation below `nu` means the plan carries no
    usable signal for that sample, so the prototype row replaces it outright;
    above the threshold the excess becomes the plan's blend weight.
    `fixed_sigma` overrides the per-row weight (ablation switch). Row sums
    are preserved; column sums are not, and are not required to be.

    `scale` is the batch size the row mass corresponds to (rows of a plan sum
    to 1/scale); it defaults to the row count and only differs when rows of
    several same-size batches are stacked into one matrix.
    """
    entries = np.asarray(getattr(plan, "entries", plan), dtype=np.float64)
    if entries.ndim != 2:
        raise ValueError("plan must be 2-d")
    n, num_source = entries.shape
    if num_source != proto.num_source:
        raise ValueError(
            f"plan has {num_source} columns, prototype has {proto.num_source}"
        )
    if scale is None:
        scale = n
    if fixed_sigma is None:
        spread = entries.std(axis=1)  # raw rows: stays far below 1
        sigma = np.where(spread < proto.nu, 0.0, spread - proto.nu)
    else:
        if not 0.0 <= fixed_sigma < 1.0:
            raise ValueError("fixed_sigma must lie in [0, 1)")
        sigma = np.full(n, float(fixed_sigma))

    normalized = _normalized_rows(entries)
    dists = np.linalg.norm(normalized[:, None, :] - proto.rows[None, :, :], axis=2)
    nearest = np.argmin(dists, axis=1)
    blended = sigma[:, None] * normalized + (1.0 - sigma[:, None]) * proto.rows[nearest]
    return blended / scale


def save_prototype(proto: CorrelationPrototype, path) -> None:
    payload = {
        "alpha": proto.alpha,
        "nu": proto.nu,
        "L_t": proto.num_target,
        "L_s": proto.num_source,
        "rows": proto.rows.tolist(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def load_prototype(path) -> CorrelationPrototype:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    rows = np.asarray(payload["rows"], dtype=np.float64)
    if rows.shape != (payload["L_t"], payload["L_s"]):
        raise ValueError("prototype rows do not match the declared shape")
    return CorrelationPrototype(rows=rows, alpha=payload["alpha"], nu=payload["nu"])


def prototype_diff(proto: CorrelationPrototype) -> list[tuple[int, float]]:
    """Per-source-class |row0 - row1| gaps, sorted descending (ties by index)."""
    if proto.num_target != 2:
        raise ValueError("the diff table is defined for two target classes")
    gaps = np.abs(proto.rows[0] - proto.rows[1])
    order = sorted(range(proto.num_source), key=lambda k: (-gaps[k], k))
    return [(k, float(gaps[k])) for k in order]
