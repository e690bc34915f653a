import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otkt import (
    CostMatrix,
    DiscreteDistribution,
    SinkhornConvergenceError,
    exact_ot,
    sinkhorn,
    transport_objective,
)


def _random_instance(rng, n, m):
    cost = CostMatrix(rng.random((n, m)))
    pw = rng.random(n) + 0.05
    qw = rng.random(m) + 0.05
    return (
        DiscreteDistribution(pw / pw.sum()),
        DiscreteDistribution(qw / qw.sum()),
        cost,
    )


def test_single_cell_plan_is_forced():
    one = DiscreteDistribution([1.0])
    for c in (0.0, 3.7, 100.0):
        plan = sinkhorn(one, one, CostMatrix([[c]]), epsilon=0.5)
        assert plan.entries == pytest.approx([[1.0]])


def test_symmetric_two_by_two_closed_form():
    # kernel exp(-M/eps) has equal row sums, so the fixed point is K / sum(K)
    p = DiscreteDistribution([0.5, 0.5])
    cost = CostMatrix([[0.0, 1.0], [1.0, 0.0]])
    plan = sinkhorn(p, p, cost, epsilon=0.1)
    expected_diag = 1.0 / (2.0 * (1.0 + np.exp(-10.0)))
    expected_off = np.exp(-10.0) / (2.0 * (1.0 + np.exp(-10.0)))
    assert plan.entries[0, 0] == pytest.approx(expected_diag, abs=1e-12)
    assert plan.entries[1, 1] == pytest.approx(expected_diag, abs=1e-12)
    assert plan.entries[0, 1] == pytest.approx(expected_off, abs=1e-12)
    assert plan.entries[0, 0] == pytest.approx(0.4999773, abs=1e-7)
    assert plan.entries[0, 1] == pytest.approx(2.27e-5, abs=1e-7)


def test_small_epsilon_matches_exact_cost():
    rng = np.random.default_rng(1)
    p = DiscreteDistribution.uniform(5)
    cost = CostMatrix(rng.random((5, 5)))
    _, optimum = exact_ot(p, p, cost)
    plan = sinkhorn(p, p, cost, epsilon=1e-3, max_iters=100_000, tol=1e-4)
    assert transport_objective(plan, cost) == pytest.approx(optimum, abs=1e-3)


def test_marginal_feasibility_seeded_sweep():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n, m = rng.integers(1, 9, size=2)
        p, q, cost = _random_instance(rng, int(n), int(m))
        plan = sinkhorn(p, q, cost, epsilon=0.2, tol=1e-7)
        assert np.abs(plan.entries.sum(axis=1) - p.weights).max() < 1e-7
        assert np.abs(plan.entries.sum(axis=0) - q.weights).max() < 1e-7


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 6),
    m=st.integers(1, 6),
    seed=st.integers(0, 2**31),
    epsilon=st.floats(0.05, 1.0),
)
def test_marginal_feasibility_property(n, m, seed, epsilon):
    rng = np.random.default_rng(seed)
    p, q, cost = _random_instance(rng, n, m)
    plan = sinkhorn(p, q, cost, epsilon=epsilon, max_iters=5000, tol=1e-6)
    assert np.abs(plan.entries.sum(axis=1) - p.weights).max() < 1e-6
    assert np.abs(plan.entries.sum(axis=0) - q.weights).max() < 1e-6


def test_cost_nondecreasing_in_epsilon():
    rng = np.random.default_rng(11)
    p = DiscreteDistribution.uniform(5)
    for _ in range(5):
        cost = CostMatrix(rng.random((5, 5)))
        values = [
            transport_objective(
                sinkhorn(p, p, cost, epsilon=eps, max_iters=200_000, tol=1e-7), cost
            )
            for eps in (1e-2, 1e-1, 1.0)
        ]
        for low, high in zip(values, values[1:]):
            assert high >= low - 1e-9


def test_epsilon_to_zero_approaches_exact():
    rng = np.random.default_rng(3)
    p = DiscreteDistribution.uniform(5)
    cost = CostMatrix(rng.random((5, 5)))
    _, optimum = exact_ot(p, p, cost)
    gaps = [
        abs(
            transport_objective(
                sinkhorn(p, p, cost, epsilon=eps, max_iters=100_000, tol=1e-4), cost
            )
            - optimum
        )
        for eps in (1.0, 1e-1, 1e-2, 1e-3)
    ]
    assert gaps[-1] < 1e-3
    for wide, tight in zip(gaps, gaps[1:]):
        assert tight <= wide + 1e-9


def test_zero_weight_atoms_carry_no_mass():
    p = DiscreteDistribution([0.0, 1.0])
    q = DiscreteDistribution([0.5, 0.5])
    plan = sinkhorn(p, q, CostMatrix([[1.0, 2.0], [3.0, 4.0]]), epsilon=0.5)
    assert np.all(plan.entries[0] == 0.0)


def test_convergence_error_carries_violation():
    rng = np.random.default_rng(5)
    p, q, cost = _random_instance(rng, 6, 6)
    with pytest.raises(SinkhornConvergenceError) as info:
        sinkhorn(p, q, cost, epsilon=1e-4, max_iters=3, tol=1e-9)
    assert info.value.violation > 0.0
    assert info.value.iterations == 3


def test_dimension_mismatch_rejected():
    p = DiscreteDistribution.uniform(2)
    q = DiscreteDistribution.uniform(3)
    with pytest.raises(ValueError, match="does not match"):
        sinkhorn(p, q, CostMatrix(np.zeros((2, 2))), epsilon=0.1)


def test_invalid_epsilon_rejected():
    p = DiscreteDistribution.uniform(2)
    with pytest.raises(ValueError, match="epsilon"):
        sinkhorn(p, p, CostMatrix(np.zeros((2, 2))), epsilon=0.0)


def test_deterministic_bitwise():
    rng = np.random.default_rng(13)
    p, q, cost = _random_instance(rng, 6, 4)
    first = sinkhorn(p, q, cost, epsilon=0.1)
    second = sinkhorn(p, q, cost, epsilon=0.1)
    assert np.array_equal(first.entries, second.entries)
