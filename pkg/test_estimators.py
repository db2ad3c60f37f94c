"""
Unit tests for curves, thresholds, the set Q and sprinkling
Run with: pytest test_estimators.py
"""

import math

import numpy as np
import pytest

import estimators
import graphs
import oracle
from errors import ContractViolationError, InvalidParameterError, ResolutionError


@pytest.fixture
def edge_curve(single_edge):
    """f(p) = p exactly: the single edge crosses |K1| = 2 at its first insertion"""
    return estimators.estimate_curve(single_edge, 1.0, np.linspace(0, 1, 101), 500, seed=1)


class TestCurves:
    """Test empirical curves from sweep pools and direct sampling"""

    def test_trivial_alpha(self, square_torus):
        curve = estimators.estimate_curve(square_torus, 1 / 16, [0.0, 0.5, 1.0], 50, seed=0)
        assert curve.f_hat.tolist() == [1.0, 1.0, 1.0]

    def test_single_edge_curve_is_identity(self, edge_curve):
        assert np.allclose(edge_curve.f_hat, edge_curve.p_grid)
        assert np.all(edge_curve.ci_lo <= edge_curve.f_hat)
        assert np.all(edge_curve.f_hat <= edge_curve.ci_hi)

    def test_monotone_bounds(self):
        curve = estimators.estimate_curve(graphs.cycle(6), 0.5, np.linspace(0.05, 0.95, 19),
                                          200, seed=2, method="direct")
        assert np.all(np.diff(curve.f_hat) >= 0)
        assert np.all(np.diff(curve.ci_lo) >= 0)
        assert np.all(np.diff(curve.ci_hi) >= 0)

    def test_direct_agrees_with_exact(self):
        g = graphs.cycle(4)
        exact = float(oracle.evaluate(oracle.exact_event(g, oracle.k1_at_least(0.75)), 0.5))
        curve = estimators.estimate_curve(g, 0.75, [0.5], 4000, seed=3, method="direct")
        assert abs(curve.f_hat[0] - exact) < 0.04

    def test_bad_grid(self, square_torus):
        with pytest.raises(InvalidParameterError):
            estimators.estimate_curve(square_torus, 0.5, [0.5, 0.2], 10, seed=0)
        with pytest.raises(InvalidParameterError):
            estimators.estimate_curve(square_torus, 0.5, [0.2], 10, seed=0, method="exact")


class TestThresholds:
    """Test threshold inversion and the sharpness ratio"""

    def test_single_edge(self, single_edge):
        est = estimators.threshold(single_edge, 1.0, 0.3, seed=4, budget=2000)
        assert est.p_hat == pytest.approx(0.3, abs=1e-6)
        assert est.p_lo <= 0.3 <= est.p_hi

    def test_cycle_half(self):
        """P_{1/2}(|K1| >= 3) = 9/16 on the 4-cycle"""
        est = estimators.threshold(graphs.cycle(4), 0.75, 9 / 16, tolerance=0.02, seed=5,
                                   batch=1000, budget=8000)
        assert abs(est.p_hat - 0.5) < 0.05

    def test_ratio_is_ordered(self):
        result = estimators.sharp_density_ratio(graphs.cycle(6), 0.5, 0.25, tolerance=0.02,
                                                seed=6, batch=500, budget=4000)
        assert result.upper.p_hat >= result.lower.p_hat
        assert result.ratio >= 1.0
        assert result.ratio_lo <= result.ratio <= result.ratio_hi

    def test_ratio_delta_range(self, square_torus):
        with pytest.raises(InvalidParameterError):
            estimators.sharp_density_ratio(square_torus, 0.5, 0.7)

    def test_tolerance_range(self, single_edge):
        with pytest.raises(InvalidParameterError):
            estimators.threshold(single_edge, 1.0, 0.3, tolerance=1.5)

    def test_bracket_is_relative_on_complete(self):
        """p_c ~ 1.4/n on K_400, far below any absolute stop width"""
        result = estimators.sharp_density_ratio(graphs.complete(400), 0.5, 0.25, tolerance=0.005,
                                                seed=1, budget=400)
        assert result.lower.p_lo > 0
        assert result.lower.p_hi < 0.01
        assert math.isfinite(result.ratio_hi)
        assert 0 < result.ratio_lo <= result.ratio <= result.ratio_hi

    def test_ratio_shrinks_with_n(self):
        """Finite brackets on K_50 and K_200, ratio closer to 1 on the larger graph"""
        small, large = (
            estimators.sharp_density_ratio(graphs.complete(n), 0.5, 0.25, tolerance=0.01,
                                           seed=2, budget=2000)
            for n in (50, 200)
        )
        for result in (small, large):
            assert result.upper.p_lo >= result.lower.p_lo > 0
            assert math.isfinite(result.ratio_hi)
        assert small.ratio > large.ratio > 1.0


class TestSupercritical:
    """Test the supercriticality verdict and typical densities"""

    def test_size_clause(self):
        verdict = estimators.epsilon_supercritical(graphs.cycle(10), 0.9, 0.2)
        assert not verdict.size_clause
        assert not verdict.supercritical

    def test_dense_giant(self):
        verdict = estimators.epsilon_supercritical(graphs.complete(300), 0.01, 0.2, seed=1)
        assert verdict.size_clause
        assert verdict.supercritical
        assert not verdict.inconclusive

    def test_typical_density(self, square_torus):
        assert estimators.typical_density(square_torus, 1.0, 0.5, 4) == 1.0
        with pytest.raises(InvalidParameterError):
            estimators.typical_density(square_torus, 1.0, 0.1, 50)


class TestQSet:
    """Test I and Q from exact and empirical curves"""

    def test_polynomial_single_edge(self, single_edge):
        lc = oracle.exact_event(single_edge, oracle.edge_open(0))
        q = estimators.q_set_from_polynomial(lc, 0.25)
        assert q.interval == pytest.approx((0.25, 0.75), abs=1e-9)
        assert q.measure == pytest.approx(0.5, abs=1e-9)
        tight = estimators.q_set_from_polynomial(lc, 0.25, slope_bound=0.5)
        assert tight.measure == pytest.approx(0.25, abs=1e-3)

    def test_empirical_single_edge(self, edge_curve):
        q = estimators.q_set_and_interval(edge_curve, 0.25)
        assert q.interval == pytest.approx((0.25, 0.75), abs=1e-9)
        assert q.measure == pytest.approx(0.5, abs=1e-9)
        assert q.slope_bound == 16.0

    def test_finding_parameters(self, edge_curve):
        report = estimators.finding_parameters_check(edge_curve, 0.25, epsilon=1.0)
        assert report.hypothesis
        assert report.holds

    def test_beta_mismatch(self, edge_curve):
        with pytest.raises(ContractViolationError):
            estimators.q_set_and_interval(edge_curve, 0.25, beta=0.5)

    def test_coarse_grid(self, single_edge):
        curve = estimators.estimate_curve(single_edge, 1.0, np.linspace(0, 1, 11), 100, seed=0)
        with pytest.raises(ResolutionError):
            estimators.q_set_and_interval(curve, 0.25)


class TestSprinkling:
    """Test the trisection recursion"""

    def test_linear_curve_takes_first_third(self):
        seq = estimators.sprinkling_sequence(lambda p: p, [(0.0, 1.0)], 6)
        steps = np.diff(seq.p_seq)
        assert steps == pytest.approx([3.0 ** -(n + 1) for n in range(5)])
        assert np.all(np.diff(seq.f_at_p) <= [2.0 ** -n for n in range(5)])

    def test_two_cells(self):
        cells = [(0.1, 0.2), (0.5, 0.6)]
        seq = estimators.sprinkling_sequence(lambda p: p, cells, 5)
        assert seq.q_set_measure == pytest.approx(0.2)
        for n, step in enumerate(np.diff(seq.p_seq)):
            assert step >= 3.0 ** -(n + 1) * 0.2 - 1e-9
        for p in seq.p_seq:
            assert any(a - 1e-12 <= p <= b + 1e-12 for a, b in cells)

    def test_steep_curve_stays_within_gain(self):
        seq = estimators.sprinkling_sequence(lambda p: min(1.0, 4 * p * p), [(0.0, 0.5)], 6)
        assert np.all(np.diff(seq.p_seq) > 0)
        assert np.all(np.diff(seq.f_at_p) <= [2.0 ** -n + seq.slack for n in range(5)])

    def test_empty_q(self):
        with pytest.raises(InvalidParameterError):
            estimators.sprinkling_sequence(lambda p: p, [], 3)
