"""
Unit tests for the monotone coupling, sandcastles, localization and activation
Run with: pytest test_coupling.py
"""

import numpy as np
import pytest

import coupling
import graphs
import oracle
import percolation
from errors import ContractViolationError, InvalidParameterError
from models import Subgraph


@pytest.fixture
def whole_torus(square_torus):
    """The torus itself as a fully open subgraph"""
    return graphs.induced_subgraph(square_torus, range(16), np.ones(32, dtype=bool))


class TestCoupling:
    """Test sample_coupled"""

    def test_nested(self, square_torus):
        for stream in range(20):
            pair = coupling.sample_coupled(square_torus, 0.3, 0.6, seed=1, stream=stream)
            assert pair.omega_q.is_subset_of(pair.omega_p)

    def test_upper_marginal_matches_sample(self, square_torus):
        pair = coupling.sample_coupled(square_torus, 0.2, 0.7, seed=3, stream=5)
        direct = percolation.sample(square_torus, 0.7, seed=3, stream=5)
        assert np.array_equal(pair.omega_p.open, direct.open)

    def test_equal_parameters(self, square_torus):
        pair = coupling.sample_coupled(square_torus, 0.5, 0.5, seed=2)
        assert np.array_equal(pair.omega_q.open, pair.omega_p.open)

    def test_reversed_parameters(self, square_torus):
        with pytest.raises(InvalidParameterError):
            coupling.sample_coupled(square_torus, 0.6, 0.3, seed=0)


class TestSandcastles:
    """Test sandcastle scores and frequencies"""

    def test_no_thinning_never_shatters(self, square_torus, whole_torus):
        report = coupling.sandcastle_score(square_torus, whole_torus, 0.5, 0.5, 0.5, seed=1)
        assert report.score.estimate == 0.0
        assert not report.is_sandcastle
        assert report.density == 1.0

    def test_full_thinning_always_shatters(self, square_torus, whole_torus):
        report = coupling.sandcastle_score(square_torus, whole_torus, 0.0, 0.5, 0.5, seed=1)
        assert report.score.estimate == 1.0
        assert report.is_sandcastle

    def test_density_below_beta(self, square_torus, whole_torus):
        sub = graphs.induced_subgraph(square_torus, [0, 1], np.ones(32, dtype=bool))
        report = coupling.sandcastle_score(square_torus, sub, 0.0, 0.5, 0.5, beta=0.5, seed=1)
        assert report.score.estimate == 1.0
        assert not report.is_sandcastle

    def test_disconnected_subgraph(self, square_torus):
        with pytest.raises(InvalidParameterError):
            coupling.sandcastle_score(square_torus, Subgraph(np.array([0, 5]), np.array([], dtype=int)),
                                      0.1, 0.5, 0.5)

    def test_foreign_edges(self, square_torus):
        sub = Subgraph(np.array([0, 1]), np.array([31]))
        with pytest.raises(ContractViolationError):
            coupling.sandcastle_score(square_torus, sub, 0.1, 0.5, 0.5)

    def test_frequency_shapes(self, square_torus):
        report = coupling.sandcastle_frequency(square_torus, 0.6, 0.3, 0.5, 0.25, 20, seed=4,
                                               inner_replicas=16, probes=[0, 5])
        assert report.probes == [0, 5]
        assert len(report.frequencies) == 2
        assert len(report.rows) == 40
        assert all(0 <= est.estimate <= 1 for est in report.frequencies)

    def test_default_probes(self, square_torus):
        probes = coupling.default_probes(square_torus)
        assert probes[0] == 0 and probes[-1] == 15
        assert len(probes) == coupling.PROBE_COUNT


class TestLocalization:
    """Test the localization estimate"""

    def test_removing_everything(self):
        g = graphs.complete(30)
        check = coupling.localization_probability(g, list(range(30)), 0.2, 0.5, 50, seed=1)
        assert check.estimate.estimate == 0.0
        assert check.holds_within()


class TestActivation:
    """Test activator probabilities"""

    def test_empty_set(self, square_torus):
        est = coupling.activator_probability(square_torus, [], 0.5, 0.5, 30, seed=0)
        assert est.estimate == 0.0

    def test_out_of_range(self, square_torus):
        with pytest.raises(ContractViolationError):
            coupling.activator_probability(square_torus, [99], 0.5, 0.5, 10)

    def test_bridge_against_exact(self):
        """Opening the bridge of the path pair joins the two halves"""
        g = graphs.path_pair()
        h = [graphs.PATH_PAIR_BRIDGE]
        exact = float(oracle.evaluate(oracle.exact_event(g, coupling.activation_event(h, 0.6)), 0.5))
        assert exact > 0
        est = coupling.activator_probability(g, h, 0.6, 0.5, 4000, seed=7)
        assert abs(est.estimate - exact) < 0.04

    def test_open_bridge_never_activates(self):
        g = graphs.path_pair()
        omega = percolation.sample(g, 1.0, seed=0)
        assert not coupling.activation_event([graphs.PATH_PAIR_BRIDGE], 0.6)(omega)


class TestConcentration:
    """Test the concentration and uniqueness bound"""

    def test_no_second_giant(self):
        check = coupling.concentration_uniqueness_check(graphs.complete(40), 0.1, 0.25, 200, seed=2)
        assert check.estimate.estimate == 0.0
        assert check.holds_within()
