"""Log-domain Sinkhorn solver for entropy-regularized optimal transport.

Minimizes <T, M> - epsilon * H(T) over couplings of two discrete
distributions by alternating log-sum-exp scaling updates. Working in the
log domain keeps small epsilon values from overflowing the Gibbs kernel.
Convergence is declared on the max marginal violation, which is exactly
the plan invariant callers rely on.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalOverflowError, SinkhornConvergenceError
from .types import CostMatrix, DiscreteDistribution, TransportPlan

DEFAULT_EPSILON = 0.1
DEFAULT_MAX_ITERS = 1000
DEFAULT_TOL = 1e-6


def _logsumexp(values: np.ndarray, axis: int, sort: bool = True) -> np.ndarray:
    # With `sort`, the exponentials are accumulated in sorted order, making
    # the reduction invariant to permutations along `axis`; solvers whose
    # support order is meaningful (classes) rely on this for bit-exact
    # permutation equivariance. Reductions over axes with a fixed identity
    # (batch rows, samples within one class) may skip it.
    peak = np.max(values, axis=axis, keepdims=True)
    shifted = values - peak
    if sort:
        shifted = np.sort(shifted, axis=axis)
    total = np.exp(shifted).sum(axis=axis)
    return np.squeeze(peak, axis=axis) + np.log(total)


def _log_kernel(log_p, log_q, scaled_neg_cost, max_iters, tol, sort=True):
    """Shared scaling loop; arrays may carry leading batch dimensions.

    Marginals must be strictly positive. Returns (plan, violation, iters);
    the caller decides whether a leftover violation is an error.
    """
    target_rows = np.exp(log_p)
    target_cols = np.exp(log_q)
    log_u = np.zeros_like(log_p)
    log_v = np.zeros_like(log_q)
    plan = None
    violation = np.inf
    iteration = 0
    for iteration in range(1, max_iters + 1):
        log_u = log_p - _logsumexp(scaled_neg_cost + log_v[..., None, :], axis=-1, sort=sort)
        log_v = log_q - _logsumexp(scaled_neg_cost + log_u[..., :, None], axis=-2, sort=sort)
        plan = np.exp(scaled_neg_cost + log_u[..., :, None] + log_v[..., None, :])
        row_gap = np.abs(plan.sum(axis=-1) - target_rows).max()
        col_gap = np.abs(plan.sum(axis=-2) - target_cols).max()
        violation = max(row_gap, col_gap)
        if violation < tol:
            break
    return plan, float(violation), iteration


def sinkhorn(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    cost: CostMatrix,
    epsilon: float = DEFAULT_EPSILON,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> TransportPlan:
    """Solve entropic OT between `p` and `q` under `cost`.

    Raises SinkhornConvergenceError (carrying the achieved violation) if the
    marginal tolerance is not reached within `max_iters`. Deterministic for
    fixed inputs.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, m = cost.shape
    if (n, m) != (p.support_dim, q.support_dim):
        raise ValueError(
            f"cost shape {cost.shape} does not match marginals "
            f"({p.support_dim}, {q.support_dim})"
        )

    # Zero-weight atoms carry no mass; strip them so the log domain stays finite.
    rows = np.flatnonzero(p.weights > 0)
    cols = np.flatnonzero(q.weights > 0)
    sub_cost = cost.entries[np.ix_(rows, cols)]
    log_p = np.log(p.weights[rows])
    log_q = np.log(q.weights[cols])

    plan_sub, violation, iters = _log_kernel(
        log_p, log_q, -sub_cost / epsilon, max_iters, tol
    )
    if not np.all(np.isfinite(plan_sub)):
        raise NumericalOverflowError("non-finite entries in the scaled plan")
    if violation >= tol:
        raise SinkhornConvergenceError(violation, iters)

    if rows.size == n and cols.size == m:
        plan = plan_sub
    else:
        plan = np.zeros((n, m))
        plan[np.ix_(rows, cols)] = plan_sub
    return TransportPlan(plan, p, q, tol=tol)
