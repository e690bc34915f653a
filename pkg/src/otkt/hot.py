"""Hierarchical optimal transport between a batch and a bank of source classes.

Per-class entropic plans couple batch rows to class samples under cosine
cost; their aggregated transport costs form the cost matrix of a second,
class-level entropic problem whose plan links each batch row to each class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import cosine_cost
from .errors import SinkhornConvergenceError
from .sinkhorn import DEFAULT_MAX_ITERS, DEFAULT_TOL, _log_kernel, sinkhorn
from .types import CostMatrix, DiscreteDistribution, TransportPlan

IMPORTANCE_L2 = 1e-3
IMPORTANCE_LR = 0.1
IMPORTANCE_MAX_ITERS = 500
IMPORTANCE_GRAD_TOL = 1e-2
DEFAULT_SUBSAMPLE = 256


@dataclass(frozen=True)
class BatchFeatures:
    """Mapped target embeddings for one mini-batch."""

    features: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"batch features must be a nonempty 2-d matrix, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("batch features must be finite")
        if np.any(np.linalg.norm(x, axis=1) == 0.0):
            raise ValueError("batch features must have no zero rows")
        object.__setattr__(self, "features", x)

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class ClassBlock:
    """Features, per-sample importance, and mean embedding of one source class."""

    features: np.ndarray
    importance: DiscreteDistribution
    mean: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        mean = np.asarray(self.mean, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError("class features must be a nonempty 2-d matrix")
        if self.importance.support_dim != feats.shape[0]:
            raise ValueError("importance length does not match the sample count")
        if np.any(self.importance.weights <= 0):
            raise ValueError("importance weights must be strictly positive")
        if mean.shape != (feats.shape[1],):
            raise ValueError("class mean dimension mismatch")
        if np.abs(mean - feats.mean(axis=0)).max() > 1e-9:
            raise ValueError("class mean must equal the row average of the features")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "mean", mean)

    @property
    def count(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SourceClassBank:
    """Per-class source embeddings with importance weights and class means."""

    classes: tuple[ClassBlock, ...]
    importance_warning: bool = False

    def __post_init__(self):
        if not self.classes:
            raise ValueError("bank needs at least one class")
        dims = {block.features.shape[1] for block in self.classes}
        if len(dims) != 1:
            raise ValueError(f"class blocks disagree on dimension: {sorted(dims)}")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return self.classes[0].features.shape[1]

    @property
    def total_samples(self) -> int:
        return sum(block.count for block in self.classes)

    @property
    def class_means(self) -> np.ndarray:
        return np.stack([block.mean for block in self.classes])


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def class_importance(
    class_features: Sequence[np.ndarray],
    regularization: float = IMPORTANCE_L2,
    learning_rate: float = IMPORTANCE_LR,
    max_iters: int = IMPORTANCE_MAX_ITERS,
    grad_tol: float = IMPORTANCE_GRAD_TOL,
) -> tuple[list[DiscreteDistribution], bool]:
    """Per-sample importance from a multinomial logistic fit on all classes.

    A softmax-linear classifier (L2-regularized, full-batch gradient descent,
    per-dimension standardized inputs) is trained on the pooled features; each
    sample's importance is the fitted probability of its own class,
    renormalized within the class. If the gradient never falls below
    `grad_tol` within the iteration cap the fit is discarded: importance
    falls back to uniform and the warning flag is set.
    """
    if len(class_features) < 2:
        raise ValueError("importance fit needs at least two classes")
    blocks = [np.asarray(block, dtype=np.float64) for block in class_features]
    for idx, block in enumerate(blocks):
        if block.ndim != 2 or block.shape[0] < 1:
            raise ValueError(f"class {idx} has no samples")
    num_classes = len(blocks)
    pooled = np.concatenate(blocks, axis=0)
    labels = np.concatenate(
        [np.full(block.shape[0], k, dtype=np.int64) for k, block in enumerate(blocks)]
    )
    count = pooled.shape[0]

    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    scaled = (pooled - mean) / std

    onehot = np.zeros((count, num_classes))
    onehot[np.arange(count), labels] = 1.0
    weights = np.zeros((pooled.shape[1], num_classes))
    bias = np.zeros(num_classes)
    converged = False
    for _ in range(max_iters):
        probs = _softmax_rows(scaled @ weights + bias)
        residual = (probs - onehot) / count
        grad_w = scaled.T @ residual + regularization * weights
        grad_b = residual.sum(axis=0)
        if max(np.abs(grad_w).max(), np.abs(grad_b).max()) < grad_tol:
            converged = True
            break
        weights -= learning_rate * grad_w
        bias -= learning_rate * grad_b

    if not converged:
        return [DiscreteDistribution.uniform(b.shape[0]) for b in blocks], True

    probs = _softmax_rows(scaled @ weights + bias)
    own = probs[np.arange(count), labels]
    importances = []
    for k, block in enumerate(blocks):
        scores = own[labels == k]
        importances.append(DiscreteDistribution(scores / scores.sum()))
    return importances, False


def build_bank(
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int | None = None,
    subsample: int | None = DEFAULT_SUBSAMPLE,
    seed: int = 0,
) -> SourceClassBank:
    """Group source embeddings by label into a bank, fitting importance once.

    Blocks preserve within-class input order. Classes larger than `subsample`
    are thinned to that cap with a seeded draw (order preserved); pass None to
    keep every sample. A single-class bank gets uniform importance (there is
    nothing to discriminate).
    """
    feats = np.asarray(features, dtype=np.float64)
    labs = np.asarray(labels)
    if feats.ndim != 2 or feats.shape[0] != labs.shape[0]:
        raise ValueError("features and labels disagree")
    if num_classes is None:
        num_classes = int(labs.max()) + 1
    if np.any(labs < 0) or np.any(labs >= num_classes):
        raise ValueError("labels out of range")

    rng = np.random.default_rng(seed)
    blocks = []
    for k in range(num_classes):
        rows = np.flatnonzero(labs == k)
        if rows.size == 0:
            raise ValueError(f"class {k} has no samples")
        if subsample is not None and rows.size > subsample:
            keep = rng.choice(rows.size, size=subsample, replace=False)
            rows = rows[np.sort(keep)]
        blocks.append(feats[rows])

    if num_classes == 1:
        importances = [DiscreteDistribution.uniform(blocks[0].shape[0])]
        warning = False
    else:
        importances, warning = class_importance(blocks)
    classes = tuple(
        ClassBlock(block, imp, block.mean(axis=0))
        for block, imp in zip(blocks, importances)
    )
    return SourceClassBank(classes, importance_warning=warning)


def low_level_ot(
    batch: BatchFeatures,
    block: ClassBlock,
    epsilon: float,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> tuple[TransportPlan, CostMatrix]:
    """Entropic plan coupling batch rows (uniform mass) to one class's samples."""
    matrix = cosine_cost(batch.features, block.features)
    plan = sinkhorn(
        DiscreteDistribution.uniform(batch.size),
        block.importance,
        matrix,
        epsilon,
        max_iters,
        tol,
    )
    return plan, matrix


def aggregate_cost(
    low_pairs: Sequence[tuple[TransportPlan, CostMatrix]],
    per_row: bool = False,
) -> CostMatrix:
    """Class-level cost matrix from per-class plans and their cost matrices.

    Default: column k is the scalar total transport cost of class k,
    broadcast down the column. `per_row=True` instead gives row i of column k
    the cost of moving row i's mass to class k, rescaled to unit mass. Both
    stay within [0, 2] for cosine costs.
    """
    if not low_pairs:
        raise ValueError("no low-level results to aggregate")
    sizes = {plan.shape[0] for plan, _ in low_pairs}
    if len(sizes) != 1:
        raise ValueError(f"low-level plans disagree on batch size: {sorted(sizes)}")
    n = sizes.pop()
    columns = []
    for plan, matrix in low_pairs:
        if plan.shape != matrix.shape:
            raise ValueError("plan and cost matrix shapes differ")
        weighted = plan.entries * matrix.entries
        if per_row:
            columns.append(weighted.sum(axis=1) * n)
        else:
            columns.append(np.full(n, weighted.sum()))
    entries = np.stack(columns, axis=1)
    np.clip(entries, 0.0, None, out=entries)
    return CostMatrix(entries)


def high_level_ot(
    aggregated: CostMatrix,
    epsilon: float,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> TransportPlan:
    """Entropic plan between batch rows and classes, both uniform.

    Rows sum to 1/n and columns to 1/num_classes, so each row scaled by n is
    a point on the class simplex.
    """
    n, num_classes = aggregated.shape
    return sinkhorn(
        DiscreteDistribution.uniform(n),
        DiscreteDistribution.uniform(num_classes),
        aggregated,
        epsilon,
        max_iters,
        tol,
    )


@dataclass(frozen=True)
class HierarchicalResult:
    """High-level plan plus every intermediate, for inspection and logging."""

    plan: TransportPlan
    aggregated: CostMatrix
    low_plans: tuple[TransportPlan, ...]
    low_costs: tuple[CostMatrix, ...]

    @property
    def class_totals(self) -> np.ndarray:
        return np.array(
            [
                float(np.sum(plan.entries * matrix.entries))
                for plan, matrix in zip(self.low_plans, self.low_costs)
            ]
        )


def _batched_low_level(batch, bank, epsilon, max_iters, tol):
    """All per-class plans in one stacked scaling loop (equal class sizes).

    Mathematically identical to solving each class alone; the shared loop
    runs until every class meets the tolerance, so individual plans may carry
    a few extra (idempotent up to roundoff) iterations.
    """
    feats = np.stack([block.features for block in bank.classes])
    feats = feats / np.linalg.norm(feats, axis=2, keepdims=True)
    unit_batch = batch.features / np.linalg.norm(batch.features, axis=1, keepdims=True)
    costs = 1.0 - np.einsum("nd,ljd->lnj", unit_batch, feats)
    np.clip(costs, 0.0, 2.0, out=costs)

    n = batch.size
    log_p = np.full((bank.num_classes, n), -np.log(n))
    log_q = np.log(np.stack([block.importance.weights for block in bank.classes]))
    # Reductions stay within one class, so sorted accumulation is not needed
    # for permutation equivariance here.
    plans, violation, iters = _log_kernel(
        log_p, log_q, -costs / epsilon, max_iters, tol, sort=False
    )
    if violation >= tol:
        raise SinkhornConvergenceError(violation, iters)

    uniform_rows = DiscreteDistribution.uniform(n)
    out_plans = []
    out_costs = []
    for k, block in enumerate(bank.classes):
        out_costs.append(CostMatrix(costs[k]))
        out_plans.append(TransportPlan(plans[k], uniform_rows, block.importance, tol=tol))
    return out_plans, out_costs


def stacked_hierarchical_plans(
    chunk_feats: np.ndarray,
    bank: SourceClassBank,
    epsilon: float,
    per_row_cost: bool = False,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """High-level plans for many same-size batches in two stacked solves.

    `chunk_feats` has shape (chunks, batch, dim). Each chunk's plans satisfy
    the same marginal tolerance they would alone; sharing the scaling loop
    only changes how far past the tolerance early finishers land. Requires
    equal class sizes.
    """
    chunks, batch_size, dim = chunk_feats.shape
    if dim != bank.dim:
        raise ValueError(f"chunk dimension {dim} does not match bank dimension {bank.dim}")
    if len({block.count for block in bank.classes}) != 1:
        raise ValueError("stacked solve requires equal class sizes")
    feats = np.stack([block.features for block in bank.classes])
    feats = feats / np.linalg.norm(feats, axis=2, keepdims=True)
    unit = chunk_feats / np.linalg.norm(chunk_feats, axis=2, keepdims=True)
    costs = 1.0 - np.einsum("cbd,ljd->clbj", unit, feats)
    np.clip(costs, 0.0, 2.0, out=costs)

    importance = np.stack([block.importance.weights for block in bank.classes])
    log_p = np.full((chunks, bank.num_classes, batch_size), -np.log(batch_size))
    log_q = np.broadcast_to(np.log(importance), (chunks, *importance.shape))
    plans, violation, iters = _log_kernel(
        log_p, log_q, -costs / epsilon, max_iters, tol, sort=False
    )
    if violation >= tol:
        raise SinkhornConvergenceError(violation, iters)

    weighted = plans * costs
    if per_row_cost:
        aggregated = np.swapaxes(weighted.sum(axis=-1), 1, 2) * batch_size
    else:
        totals = weighted.sum(axis=(-1, -2))
        aggregated = np.broadcast_to(totals[:, None, :], (chunks, batch_size, bank.num_classes))
    aggregated = np.clip(aggregated, 0.0, None)

    log_rows = np.full((chunks, batch_size), -np.log(batch_size))
    log_cols = np.full((chunks, bank.num_classes), -np.log(bank.num_classes))
    high, violation, iters = _log_kernel(
        log_rows, log_cols, -aggregated / epsilon, max_iters, tol
    )
    if violation >= tol:
        raise SinkhornConvergenceError(violation, iters)
    return high


def hierarchical_ot(
    batch: BatchFeatures,
    bank: SourceClassBank,
    epsilon: float,
    per_row_cost: bool = False,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> HierarchicalResult:
    """Low-level plans for every class, cost aggregation, then the class plan.

    Classes of equal size are solved in one stacked loop; otherwise each
    class is solved on its own. Aggregation order is always class index.
    """
    if batch.features.shape[1] != bank.dim:
        raise ValueError(
            f"batch dimension {batch.features.shape[1]} does not match bank dimension {bank.dim}"
        )
    sizes = {block.count for block in bank.classes}
    if len(sizes) == 1 and bank.num_classes > 1:
        low_plans, low_costs = _batched_low_level(batch, bank, epsilon, max_iters, tol)
    else:
        low_plans = []
        low_costs = []
        for block in bank.classes:
            plan, matrix = low_level_ot(batch, block, epsilon, max_iters, tol)
            low_plans.append(plan)
            low_costs.append(matrix)
    aggregated = aggregate_cost(list(zip(low_plans, low_costs)), per_row=per_row_cost)
    plan = high_level_ot(aggregated, epsilon, max_iters, tol)
    return HierarchicalResult(
        plan=plan,
        aggregated=aggregated,
        low_plans=tuple(low_plans),
        low_costs=tuple(low_costs),
    )
