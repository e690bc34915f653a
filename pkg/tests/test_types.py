import numpy as np
import pytest

from otkt import CostMatrix, DiscreteDistribution, TransportPlan, transport_objective


class TestDiscreteDistribution:
    def test_uniform(self):
        d = DiscreteDistribution.uniform(7)
        assert d.support_dim == 7
        assert abs(d.weights.sum() - 1.0) < 1e-9

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            DiscreteDistribution([0.5, 0.6, -0.1])

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError, match="sum to 1"):
            DiscreteDistribution([0.5, 0.4])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DiscreteDistribution([])

    def test_zero_weights_allowed(self):
        d = DiscreteDistribution([0.0, 1.0])
        assert d.weights[0] == 0.0

    def test_frozen(self):
        d = DiscreteDistribution.uniform(3)
        with pytest.raises(ValueError):
            d.weights[0] = 2.0


class TestCostMatrix:
    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            CostMatrix([[1.0, -0.5]])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            CostMatrix([[np.inf, 0.0]])

    def test_shape(self):
        assert CostMatrix([[0.0, 1.0]]).shape == (1, 2)


class TestTransportPlan:
    def test_valid(self):
        p = DiscreteDistribution([0.5, 0.5])
        plan = TransportPlan([[0.5, 0.0], [0.0, 0.5]], p, p)
        assert plan.shape == (2, 2)

    def test_rejects_marginal_violation(self):
        p = DiscreteDistribution([0.5, 0.5])
        with pytest.raises(ValueError, match="row sums"):
            TransportPlan([[0.4, 0.0], [0.0, 0.6]], p, p)

    def test_rejects_negative_mass(self):
        p = DiscreteDistribution([0.5, 0.5])
        with pytest.raises(ValueError, match="nonnegative"):
            TransportPlan([[0.6, -0.1], [-0.1, 0.6]], p, p)

    def test_clips_roundoff_negatives(self):
        p = DiscreteDistribution([0.5, 0.5])
        entries = np.array([[0.5, -1e-15], [0.0, 0.5]])
        plan = TransportPlan(entries, p, p)
        assert plan.entries.min() == 0.0

    def test_custom_tolerance(self):
        p = DiscreteDistribution([0.5, 0.5])
        entries = [[0.5001, 0.0], [0.0, 0.4999]]
        with pytest.raises(ValueError):
            TransportPlan(entries, p, p, tol=1e-6)
        assert TransportPlan(entries, p, p, tol=1e-3).tol == 1e-3


def test_transport_objective_matches_hand_sum():
    p = DiscreteDistribution([0.5, 0.5])
    plan = TransportPlan([[0.25, 0.25], [0.25, 0.25]], p, p)
    cost = CostMatrix([[1.0, 2.0], [3.0, 4.0]])
    assert transport_objective(plan, cost) == pytest.approx(0.25 * 10.0)
