"""
Unit tests for exact enumeration on tiny graphs
Run with: pytest test_oracle.py
"""

from fractions import Fraction

import pytest

import graphs
import oracle
import percolation
from errors import InvalidInstanceError, NoThresholdError, NotMonotoneError, SizeLimitError

HALF = Fraction(1, 2)


class TestExactEvent:
    """Test level counts and polynomial evaluation"""

    def test_trivial_event_counts_binomials(self):
        lc = oracle.exact_event(graphs.cycle(3), oracle.always)
        assert lc.counts == (1, 3, 3, 1)
        assert oracle.evaluate(lc, Fraction(1, 3)) == 1

    def test_cycle_giant(self):
        """|K1| >= 3 on the 4-cycle needs two adjacent open edges"""
        lc = oracle.exact_event(graphs.cycle(4), oracle.k1_at_least(0.75))
        assert lc.counts == (0, 0, 4, 4, 1)
        assert oracle.evaluate(lc, HALF) == Fraction(9, 16)

    def test_triangle_two_point(self):
        lc = oracle.exact_event(graphs.complete(3), oracle.connects(0, 1))
        assert oracle.evaluate(lc, HALF) == Fraction(5, 8)
        assert oracle.evaluate(lc, 0.5) == pytest.approx(0.625)

    def test_single_edge(self, single_edge):
        lc = oracle.exact_event(single_edge, oracle.edge_open(0))
        assert oracle.evaluate(lc, 0.3) == pytest.approx(0.3)
        assert oracle.derivative(lc, Fraction(1, 3)) == 1

    def test_derivative_matches_difference_quotient(self):
        lc = oracle.exact_event(graphs.cycle(4), oracle.k1_at_least(0.75))
        h = 1e-6
        numeric = (oracle.evaluate(lc, 0.4 + h) - oracle.evaluate(lc, 0.4 - h)) / (2 * h)
        assert oracle.derivative(lc, 0.4) == pytest.approx(numeric, rel=1e-6)

    def test_too_many_edges(self):
        with pytest.raises(SizeLimitError):
            oracle.exact_event(graphs.complete(8), oracle.always)


class TestThreshold:
    """Test exact threshold inversion"""

    def test_single_edge(self, single_edge):
        lc = oracle.exact_event(single_edge, oracle.edge_open(0))
        assert oracle.exact_threshold(lc, 0.3) == pytest.approx(0.3, abs=1e-9)

    def test_cycle_half(self):
        lc = oracle.exact_event(graphs.cycle(4), oracle.k1_at_least(0.75))
        assert oracle.exact_threshold(lc, 9 / 16) == pytest.approx(0.5, abs=1e-9)

    def test_trivial_event(self):
        lc = oracle.exact_event(graphs.cycle(3), oracle.always)
        with pytest.raises(NoThresholdError):
            oracle.exact_threshold(lc, 0.5)


class TestIdentities:
    """Test the derivative identity, positive correlation and insertion tolerance"""

    @pytest.mark.parametrize("graph", [graphs.cycle(3), graphs.cycle(5), graphs.complete(4)],
                             ids=["C3", "C5", "K4"])
    @pytest.mark.parametrize("alpha", [0.5, 0.75, 1.0])
    def test_russo(self, graph, alpha):
        report = oracle.russo_decomposition(graph, oracle.k1_at_least(alpha))
        assert report.holds
        assert len(report.pivotal) == graph.m_edges
        assert len(report.points) == graph.m_edges + 1

    def test_russo_hypercube(self):
        assert oracle.russo_decomposition(graphs.hypercube(3), oracle.k1_at_least(0.5)).holds

    def test_single_edge_always_pivotal(self, single_edge):
        report = oracle.russo_decomposition(single_edge, oracle.edge_open(0))
        assert report.pivotal[0].counts == (1, 1)

    def test_decreasing_event_rejected(self):
        with pytest.raises(NotMonotoneError) as info:
            oracle.russo_decomposition(graphs.cycle(3), oracle.k1_equals(1))
        assert info.value.witness == []

    def test_harris(self):
        report = oracle.harris_check(graphs.cycle(4), oracle.connects(0, 1), oracle.connects(0, 2),
                                     oracle.BATTERY_P)
        assert report.holds
        assert len(report.rows) == 3

    def test_harris_rejects_decreasing_event(self):
        """No open edge at all is a decreasing event; the inequality does not apply"""
        def all_closed(omega):
            return not omega.open.any()

        with pytest.raises(NotMonotoneError):
            oracle.harris_check(graphs.cycle(4), all_closed, oracle.connects(0, 2), [HALF])
        with pytest.raises(NotMonotoneError):
            oracle.harris_check(graphs.cycle(4), oracle.connects(0, 2), all_closed, [HALF])

    def test_insertion_tolerance(self):
        """A = {e0 open, e1 and e2 closed} on the triangle with F = {e1, e2}"""
        def event(omega):
            return bool(omega.open[0] and not omega.open[1] and not omega.open[2])

        report = oracle.insertion_tolerance_check(
            graphs.cycle(3), event, [1, 2], lambda omega: [1, 2], eta=1, p=HALF,
        )
        assert report.p_event == Fraction(1, 8)
        assert report.p_plus == Fraction(1, 4)
        assert report.bound == Fraction(1, 64)
        assert report.holds

    def test_insertion_rule_precondition(self):
        with pytest.raises(InvalidInstanceError):
            oracle.insertion_tolerance_check(
                graphs.cycle(3), oracle.edge_open(0), [0, 1], lambda omega: [0],
                eta=HALF, p=HALF,
            )


class TestBattery:
    """Test the Monte Carlo cross-validation battery"""

    def test_battery_graphs(self):
        tags = [g.family_tag for g in oracle.battery_graphs()]
        assert len(tags) == 9
        assert all(g.m_edges <= oracle.MAX_EDGES for g in oracle.battery_graphs())

    @pytest.mark.slow
    def test_battery_passes(self):
        report = oracle.validate_battery(replicas=4000, seed=3)
        assert len(report.rows) == 9 * 3 * 2
        assert report.passed
        assert all(row["holds"] for row in report.russo)

    def test_simulation_matches_exact(self):
        """Direct simulation of the 4-cycle at p = 1/2 against P(|K1| >= 3) = 9/16"""
        rows = percolation.simulate(graphs.cycle(4), 0.5, 4000, seed=8)
        hits = sum(1 for row in rows if row.k1 >= 3)
        lc = oracle.exact_event(graphs.cycle(4), oracle.k1_at_least(0.75))
        exact = float(oracle.evaluate(lc, HALF))
        assert abs(hits / 4000 - exact) < 4 * (exact * (1 - exact) / 4000) ** 0.5

    def test_battery_counts_come_from_simulation(self):
        """The battery tallies exactly what the direct simulation produces for the same seed"""
        graph = graphs.cycle(5)
        giant, linked = oracle._battery_hits(graph, 0.5, 2, 3, 300, 17, threads=1)
        rows = percolation.simulate(graph, 0.5, 300, seed=17)
        assert giant == sum(1 for row in rows if row.k1 >= 3)
        connected = sum(
            percolation.connected(graph, percolation.sample(graph, 0.5, 17, r), 0, 2) for r in range(300)
        )
        assert linked == connected
