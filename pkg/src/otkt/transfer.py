"""Knowledge transfer through the class plan, and curriculum-weighted fusion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hot import SourceClassBank


@dataclass(frozen=True)
class CurriculumSchedule:
    """Cosine ramp of the transfer weight, from 0 up to `xi_max`."""

    xi_max: float
    total_epochs: int

    def __post_init__(self):
        if not 0.0 <= self.xi_max <= 1.0:
            raise ValueError("xi_max must lie in [0, 1]")
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be at least 1")


def curriculum_weight(schedule: CurriculumSchedule, epoch: int) -> float:
    """Transfer weight at 1-based `epoch`; 0 at the first epoch, xi_max past the last."""
    if not 1 <= epoch <= schedule.total_epochs + 1:
        raise ValueError(
            f"epoch {epoch} outside [1, {schedule.total_epochs + 1}]"
        )
    phase = (epoch - 1) / schedule.total_epochs * math.pi
    return schedule.xi_max / 2.0 * (1.0 - math.cos(phase))


def transfer_features(plan, bank: SourceClassBank, network=None) -> np.ndarray:
    """Per-row convex mix of class means under the (scaled) class plan.

    Each plan row, scaled by the batch size, sums to one, so every pre-map
    vector lies in the convex hull of the class means. `network` (the
    transfer map) may be None to return the raw combination.
    """
    weights = np.asarray(getattr(plan, "entries", plan), dtype=np.float64)
    if weights.ndim != 2:
        raise ValueError("plan must be 2-d")
    if weights.shape[1] != bank.num_classes:
        raise ValueError(
            f"plan has {weights.shape[1]} columns, bank has {bank.num_classes} classes"
        )
    combined = (weights.shape[0] * weights) @ bank.class_means
    if network is None:
        return combined
    return network.forward(combined)


def fuse(transferred: np.ndarray, mapped: np.ndarray, xi_prime: float) -> np.ndarray:
    """Convex blend of transferred and mapped features."""
    a = np.asarray(transferred, dtype=np.float64)
    b = np.asarray(mapped, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not 0.0 <= xi_prime <= 1.0:
        raise ValueError("xi_prime must lie in [0, 1]")
    return xi_prime * a + (1.0 - xi_prime) * b


def fuse_modalities(visual: np.ndarray, audio: np.ndarray) -> np.ndarray:
    """Equal-weight average of two modality embeddings."""
    a = np.asarray(visual, dtype=np.float64)
    b = np.asarray(audio, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return 0.5 * a + 0.5 * b
