"""Classification and feature-alignment losses."""

from __future__ import annotations

import numpy as np

from .divergence import METHOD_ENTROPIC, METHOD_EXACT, DivergenceTerms, divergence_terms
from .hot import SourceClassBank
from .types import DiscreteDistribution

PROB_FLOOR = 1e-12


def cross_entropy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class, clamped at a floor."""
    probs = np.asarray(predictions, dtype=np.float64)
    labs = np.asarray(labels)
    if probs.ndim != 2 or labs.shape != (probs.shape[0],):
        raise ValueError("predictions must be (n, classes) with one label per row")
    picked = probs[np.arange(probs.shape[0]), labs]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def cross_entropy_grad_logits(predictions: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross entropy with respect to the softmax logits."""
    probs = np.asarray(predictions, dtype=np.float64)
    grad = probs.copy()
    grad[np.arange(probs.shape[0]), np.asarray(labels)] -= 1.0
    return grad / probs.shape[0]


def alignment_terms(
    mapped: np.ndarray,
    bank: SourceClassBank,
    method: str = METHOD_EXACT,
    epsilon: float = 0.1,
) -> DivergenceTerms:
    """Divergence pieces between the mapped batch cloud and the class-mean cloud."""
    if method not in (METHOD_EXACT, METHOD_ENTROPIC):
        raise ValueError(f"unknown alignment method {method!r}")
    return divergence_terms(
        mapped,
        DiscreteDistribution.uniform(mapped.shape[0]),
        bank.class_means,
        DiscreteDistribution.uniform(bank.num_classes),
        method=method,
        epsilon=epsilon,
        fast_exact_self=True,
    )


def total_loss(
    labels: np.ndarray,
    predictions: np.ndarray,
    mapped: np.ndarray,
    bank: SourceClassBank,
    eta: float,
    method: str = METHOD_EXACT,
    epsilon: float = 0.1,
) -> tuple[float, float, float]:
    """Total, classification, and alignment losses (total = ce + eta * ot)."""
    ce = cross_entropy(predictions, labels)
    ot = alignment_terms(mapped, bank, method=method, epsilon=epsilon).value
    return ce + eta * ot, ce, ot
