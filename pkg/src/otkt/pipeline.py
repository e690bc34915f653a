"""Trainable pipeline: map, transfer, fuse, classify; train and infer loops.

Gradients are analytic and stop at every transport plan: plans enter the
loss only through their values, with the alignment loss reaching the mapper
through the envelope gradient of the frozen-plan transport cost. Training
updates the correlation prototype each step; inference re-weights plan rows
against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .cost import cosine_cost, gradient_wrt_features
from .divergence import METHOD_ENTROPIC, METHOD_EXACT, DivergenceTerms
from .hot import (
    BatchFeatures,
    HierarchicalResult,
    SourceClassBank,
    hierarchical_ot,
    stacked_hierarchical_plans,
)
from .losses import alignment_terms, cross_entropy, cross_entropy_grad_logits
from .metrics import Metrics, compute_metrics
from .network import ACT_IDENTITY, ACT_RELU, ACT_SOFTMAX, Adam, DenseNetwork
from .prototype import CorrelationPrototype, momentum_update, reweight
from .transfer import CurriculumSchedule, curriculum_weight, fuse, transfer_features
from .types import transport_objective

FIXED_SIGMA_VALUE = 0.2


@dataclass
class Model:
    """The three trainable maps: domain mapper, transfer head, classifier."""

    mapper: DenseNetwork
    transfer_head: DenseNetwork
    classifier: DenseNetwork


def build_model(config: RunConfig, dim: int, num_target: int, rng: np.random.Generator) -> Model:
    """Mapper and transfer head are d -> hidden -> d; classifier is a softmax head.

    With `identity_init`, the two same-space maps start as the identity so
    the plan geometry begins aligned with the source embeddings; otherwise
    they start from seeded random weights.
    """
    if config.identity_init:
        mapper = DenseNetwork.create_identity_map(dim, config.hidden_mapper, rng)
        transfer_head = DenseNetwork.create_identity_map(dim, config.hidden_transfer, rng)
    else:
        mapper = DenseNetwork.create([dim, config.hidden_mapper, dim], rng)
        transfer_head = DenseNetwork.create([dim, config.hidden_transfer, dim], rng)
    classifier = DenseNetwork.create([dim, num_target], rng, final_activation=ACT_SOFTMAX)
    return Model(mapper=mapper, transfer_head=transfer_head, classifier=classifier)


def trainable_params(model: Model, config: RunConfig) -> list[np.ndarray]:
    params = model.mapper.parameters()
    if not config.f2_identity:
        params = params + model.transfer_head.parameters()
    return params + model.classifier.parameters()


@dataclass
class SolvedPlans:
    """Transport solutions for one batch, treated as constants by backward."""

    hot: HierarchicalResult
    alignment: DivergenceTerms


def solve_plans(mapped: np.ndarray, bank: SourceClassBank, config: RunConfig) -> SolvedPlans:
    hot = hierarchical_ot(
        BatchFeatures(mapped),
        bank,
        config.epsilon,
        per_row_cost=config.per_row_cost,
        max_iters=config.sinkhorn_max_iters,
        tol=config.sinkhorn_tol,
    )
    method = METHOD_ENTROPIC if config.entropic_divergence else METHOD_EXACT
    terms = alignment_terms(mapped, bank, method=method, epsilon=config.epsilon)
    return SolvedPlans(hot=hot, alignment=terms)


def frozen_alignment_value(mapped: np.ndarray, bank: SourceClassBank, terms: DivergenceTerms) -> float:
    """Alignment loss with the plans pinned but costs moving with the features.

    At the solve point this equals the divergence itself; under perturbed
    features it is exactly the objective whose gradient backward propagates,
    which is what finite-difference checks must see.
    """
    means = bank.class_means
    cross = transport_objective(terms.cross_plan, cosine_cost(mapped, means))
    self_a = transport_objective(terms.self_a_plan, cosine_cost(mapped, mapped))
    return cross - 0.5 * self_a - 0.5 * terms.self_b_cost


@dataclass
class ForwardState:
    mapped: np.ndarray
    combined: np.ndarray
    transferred: np.ndarray
    fused: np.ndarray
    predictions: np.ndarray
    plans: SolvedPlans
    mapper_cache: list
    head_cache: list | None
    classifier_cache: list


@dataclass
class StepLosses:
    loss: float
    loss_ce: float
    loss_ot: float


def training_forward(
    model: Model,
    x: np.ndarray,
    bank: SourceClassBank,
    config: RunConfig,
    xi_prime: float,
    plans: SolvedPlans | None = None,
) -> ForwardState:
    mapped, mapper_cache = model.mapper.forward_cached(x)
    if plans is None:
        plans = solve_plans(mapped, bank, config)
    combined = transfer_features(plans.hot.plan, bank, None)
    if config.f2_identity:
        transferred, head_cache = combined, None
    else:
        transferred, head_cache = model.transfer_head.forward_cached(combined)
    fused = fuse(transferred, mapped, xi_prime)
    predictions, classifier_cache = model.classifier.forward_cached(fused)
    return ForwardState(
        mapped=mapped,
        combined=combined,
        transferred=transferred,
        fused=fused,
        predictions=predictions,
        plans=plans,
        mapper_cache=mapper_cache,
        head_cache=head_cache,
        classifier_cache=classifier_cache,
    )


def training_loss(state: ForwardState, labels: np.ndarray, bank: SourceClassBank, config: RunConfig) -> StepLosses:
    ce = cross_entropy(state.predictions, labels)
    ot = frozen_alignment_value(state.mapped, bank, state.plans.alignment)
    return StepLosses(loss=ce + config.eta * ot, loss_ce=ce, loss_ot=ot)


def training_gradients(
    model: Model,
    state: ForwardState,
    labels: np.ndarray,
    bank: SourceClassBank,
    config: RunConfig,
    xi_prime: float,
) -> list[np.ndarray]:
    """Gradients for `trainable_params`, with all transport plans constant."""
    grad_logits = cross_entropy_grad_logits(state.predictions, labels)
    grad_fused, classifier_grads = model.classifier.backward(
        state.classifier_cache, grad_logits, grad_is_logits=True
    )
    grad_transferred = xi_prime * grad_fused
    if config.f2_identity:
        head_grads = []
    else:
        _, head_grads = model.transfer_head.backward(state.head_cache, grad_transferred)

    grad_mapped = (1.0 - xi_prime) * grad_fused
    if config.eta != 0.0:
        # Envelope gradient of the frozen cross plan; both self terms sit at
        # stationary (zero-cost) cells and contribute nothing.
        grad_mapped = grad_mapped + config.eta * gradient_wrt_features(
            state.plans.alignment.cross_plan, state.mapped, bank.class_means
        )
    _, mapper_grads = model.mapper.backward(state.mapper_cache, grad_mapped)

    flat: list[np.ndarray] = []
    for grouped in (mapper_grads, head_grads, classifier_grads):
        for grad_w, grad_b in grouped:
            flat.append(grad_w)
            flat.append(grad_b)
    return flat


def backward_step(
    model: Model,
    optimizer: Adam,
    proto: CorrelationPrototype,
    x: np.ndarray,
    labels: np.ndarray,
    bank: SourceClassBank,
    config: RunConfig,
    epoch: int,
    plans: SolvedPlans | None = None,
) -> tuple[StepLosses, ForwardState]:
    """One training step: forward, analytic backward, Adam, prototype update."""
    schedule = CurriculumSchedule(config.xi, config.epochs)
    xi_prime = curriculum_weight(schedule, epoch)
    state = training_forward(model, x, bank, config, xi_prime, plans=plans)
    losses = training_loss(state, labels, bank, config)
    grads = training_gradients(model, state, labels, bank, config, xi_prime)
    for grad in grads:
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(
                f"non-finite gradient (loss {losses.loss!r}, epoch {epoch})"
            )
    optimizer.step(trainable_params(model, config), grads)
    momentum_update(proto, state.plans.hot.plan, labels)
    return losses, state


def test_time_xi(config: RunConfig) -> float:
    """Transfer weight used for inference, per the test_xi policy."""
    schedule = CurriculumSchedule(config.xi, config.epochs)
    if config.test_xi == "max":
        return curriculum_weight(schedule, config.epochs + 1)
    return curriculum_weight(schedule, config.epochs)


def infer_batch(
    model: Model,
    proto: CorrelationPrototype,
    x: np.ndarray,
    bank: SourceClassBank,
    config: RunConfig,
    xi_prime: float | None = None,
) -> np.ndarray:
    """Inference forward: the class plan is re-weighted against the prototype."""
    if xi_prime is None:
        xi_prime = test_time_xi(config)
    mapped = model.mapper.forward(x)
    hot = hierarchical_ot(
        BatchFeatures(mapped),
        bank,
        config.epsilon,
        per_row_cost=config.per_row_cost,
        max_iters=config.sinkhorn_max_iters,
        tol=config.sinkhorn_tol,
    )
    fixed = FIXED_SIGMA_VALUE if config.fixed_sigma else None
    row_weights = reweight(proto, hot.plan, fixed_sigma=fixed)
    head = None if config.f2_identity else model.transfer_head
    transferred = transfer_features(row_weights, bank, head)
    fused = fuse(transferred, mapped, xi_prime)
    return model.classifier.forward(fused)


def _stacked_row_mix(mapped, bank, proto, config, batch_size):
    """Re-weighted, normalized plan rows for every `batch_size` chunk of `mapped`.

    Equal-size chunks share one stacked hierarchical solve; a remainder chunk
    gets its own. Falls back to per-chunk solves when class sizes differ.
    Returned rows each sum to one (the scale `transfer_features` applies).
    """
    count = mapped.shape[0]
    fixed = FIXED_SIGMA_VALUE if config.fixed_sigma else None
    stackable = len({block.count for block in bank.classes}) == 1
    split = count - count % batch_size
    groups = []
    if split:
        groups.append(mapped[:split].reshape(-1, batch_size, mapped.shape[1]))
    if count % batch_size:
        groups.append(mapped[split:][None, :, :])
    pieces = []
    for group in groups:
        chunk_size = group.shape[1]
        if stackable:
            plans = stacked_hierarchical_plans(
                group,
                bank,
                config.epsilon,
                per_row_cost=config.per_row_cost,
                max_iters=config.sinkhorn_max_iters,
                tol=config.sinkhorn_tol,
            )
            rows = plans.reshape(-1, bank.num_classes)
        else:
            rows = np.concatenate(
                [
                    hierarchical_ot(
                        BatchFeatures(chunk),
                        bank,
                        config.epsilon,
                        per_row_cost=config.per_row_cost,
                        max_iters=config.sinkhorn_max_iters,
                        tol=config.sinkhorn_tol,
                    ).plan.entries
                    for chunk in group
                ]
            )
        reweighted = reweight(proto, rows, fixed_sigma=fixed, scale=chunk_size)
        pieces.append(chunk_size * reweighted)
    return np.concatenate(pieces)


def evaluate(
    model: Model,
    proto: CorrelationPrototype,
    features: np.ndarray,
    labels: np.ndarray,
    bank: SourceClassBank,
    config: RunConfig,
    xi_prime: float | None = None,
    batch_size: int | None = None,
) -> tuple[Metrics, np.ndarray]:
    """Chunked inference over a dataset; returns metrics and positive scores.

    Matches a chunk-by-chunk `infer_batch` loop up to solver tolerance; the
    equal-size chunks are solved in one stacked pass for speed.
    """
    if batch_size is None:
        batch_size = config.batch_test
    if xi_prime is None:
        xi_prime = test_time_xi(config)
    features = np.asarray(features, dtype=np.float64)
    mapped = model.mapper.forward(features)
    row_mix = _stacked_row_mix(mapped, bank, proto, config, batch_size)
    combined = row_mix @ bank.class_means
    head = None if config.f2_identity else model.transfer_head
    transferred = combined if head is None else head.forward(combined)
    fused = fuse(transferred, mapped, xi_prime)
    predictions = model.classifier.forward(fused)
    flat = predictions[:, 1]
    return compute_metrics(flat, labels), flat


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    xi_prime: float
    loss: float
    loss_ce: float
    loss_ot: float
    acc: float
    f1: float
    auc: float | None

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "xi_prime": self.xi_prime,
            "loss": self.loss,
            "loss_ce": self.loss_ce,
            "loss_ot": self.loss_ot,
            "acc": self.acc,
            "f1": self.f1,
            "auc": self.auc,
        }


@dataclass
class TrainOutput:
    model: Model
    proto: CorrelationPrototype
    records: list[EpochRecord]


def train(
    config: RunConfig,
    features: np.ndarray,
    labels: np.ndarray,
    bank: SourceClassBank,
    num_target: int = 2,
    trace=None,
) -> TrainOutput:
    """Seeded epochs of shuffled mini-batches, with a post-epoch evaluation.

    The per-epoch evaluation runs the inference path (prototype re-weighting
    active) over the training data in `batch_test` chunks, so prototype
    effects show up in the log. Fully deterministic for a fixed seed.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    count = features.shape[0]
    if count < config.batch_train:
        raise ValueError(
            f"dataset has {count} samples, smaller than one training batch "
            f"({config.batch_train})"
        )
    if num_target != 2:
        raise ValueError("the training harness supports two target classes")

    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    model = build_model(config, features.shape[1], num_target, np.random.default_rng(init_seq))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    proto = CorrelationPrototype.initialize(
        num_target, bank.num_classes, config.alpha, config.nu
    )
    optimizer = Adam.for_params(trainable_params(model, config), config.learning_rate)
    schedule = CurriculumSchedule(config.xi, config.epochs)

    records = []
    for epoch in range(1, config.epochs + 1):
        xi_prime = curriculum_weight(schedule, epoch)
        order = shuffle_rng.permutation(count)
        sums = np.zeros(3)
        for index, start in enumerate(range(0, count, config.batch_train)):
            rows = order[start : start + config.batch_train]
            losses, state = backward_step(
                model, optimizer, proto, features[rows], labels[rows], bank, config, epoch
            )
            sums += np.array([losses.loss, losses.loss_ce, losses.loss_ot]) * rows.size
            if trace is not None:
                plan_rows = state.plans.hot.plan.entries
                trace(
                    {
                        "epoch": epoch,
                        "batch": index,
                        "class_costs": state.plans.hot.class_totals.tolist(),
                        "row_sums": plan_rows.sum(axis=1).tolist(),
                        "row_std": plan_rows.std(axis=1).tolist(),
                    }
                )
        mean_loss, mean_ce, mean_ot = (sums / count).tolist()
        metrics, _ = evaluate(model, proto, features, labels, bank, config, xi_prime)
        records.append(
            EpochRecord(
                epoch=epoch,
                xi_prime=xi_prime,
                loss=mean_loss,
                loss_ce=mean_ce,
                loss_ot=mean_ot,
                acc=metrics.acc,
                f1=metrics.f1,
                auc=metrics.auc,
            )
        )
    return TrainOutput(model=model, proto=proto, records=records)
