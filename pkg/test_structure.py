"""
Unit tests for separators, density and molecular decompositions
Run with: pytest test_structure.py
"""

import pytest

import graphs
import structure
from errors import InvalidParameterError, SizeLimitError, UnsupportedGraphError


@pytest.fixture(scope="module")
def kn_box():
    return graphs.kn_box_k2(20)


@pytest.fixture(scope="module")
def big_torus():
    return graphs.torus([16, 16])


class TestSeparator:
    """Test exact and heuristic balanced separators"""

    def test_complete_graph(self):
        """K6: the cheapest balanced side has two vertices"""
        result = structure.separator(graphs.complete(6), 1 / 3)
        assert result.cut_size == 8
        assert result.side_a.tolist() == [1, 2]
        assert result.exact
        assert 1 / 3 <= result.degree_weighted_share <= 2 / 3

    def test_torus(self, square_torus):
        result = structure.separator(square_torus, 1 / 3)
        assert result.cut_size == 8
        assert structure.boundary_size(square_torus, result.side_a) == 8

    def test_half_balance(self):
        result = structure.separator(graphs.cycle(8), 0.5)
        assert result.cut_size == 2
        assert result.side_a.size == 4

    def test_heuristic_small(self):
        result = structure.separator(graphs.complete(6), 1 / 3, mode="heuristic", restarts=4, seed=1)
        assert result.cut_size == 8
        assert not result.exact

    def test_heuristic_splits_copies(self, kn_box):
        result = structure.separator(kn_box, 1 / 3, mode="heuristic", seed=2)
        assert result.cut_size <= 20
        assert 1 / 3 - 1e-9 <= result.degree_weighted_share <= 2 / 3 + 1e-9

    def test_exact_size_limit(self):
        with pytest.raises(SizeLimitError):
            structure.separator(graphs.torus([8, 8]), 1 / 3)

    def test_bad_arguments(self, square_torus):
        with pytest.raises(InvalidParameterError):
            structure.separator(square_torus, 0.6)
        with pytest.raises(InvalidParameterError):
            structure.separator(square_torus, 0.3, mode="spectral")


class TestDensity:
    """Test edge density reports"""

    @pytest.mark.parametrize("n", [5, 20, 100])
    def test_complete(self, n):
        report = structure.dense_check(graphs.complete(n))
        assert report.edge_density == pytest.approx((n - 1) / (2 * n))
        assert report.degree_ratio == pytest.approx((n - 1) / n)

    def test_cycle(self):
        assert structure.dense_check(graphs.cycle(50)).edge_density == pytest.approx(1 / 50)

    def test_hypercube(self):
        report = structure.dense_check(graphs.hypercube(10))
        assert report.edge_density == pytest.approx(5120 / 1024 ** 2)


class TestMolecular:
    """Test orbit-union searches"""

    def test_kn_box_k2(self, kn_box):
        report = structure.molecular_search(kn_box, 2.0)
        assert report.m == 2
        assert report.f_size == 20
        assert report.removed_orbits == (1,)
        assert report.components_equal_size
        assert report.component_sizes == (20, 20)
        assert structure.verify_molecular(kn_box, report)

    def test_torus(self, big_torus):
        report = structure.molecular_search(big_torus, 4.0)
        assert report.m == 16
        assert report.f_size == 256
        assert report.removed_orbits == (0,)
        assert not report.dense
        assert report.components_equal_size

    def test_complete_graph_has_none(self):
        assert structure.molecular_search(graphs.complete(30), 4.0) is None

    def test_tight_budget(self, kn_box):
        assert structure.molecular_search(kn_box, 0.25) is None

    def test_no_orbits(self):
        with pytest.raises(UnsupportedGraphError):
            structure.molecular_search(graphs.path_pair(), 4.0)

    def test_witness_from_kn_box(self, kn_box):
        report = structure.molecular_search(kn_box, 2.0)
        witness = structure.separator_from_molecule(kn_box, report)
        assert witness.cut_size == 20
        assert witness.degree_weighted_share == pytest.approx(0.5)

    def test_witness_from_torus(self, big_torus):
        report = structure.molecular_search(big_torus, 4.0)
        witness = structure.separator_from_molecule(big_torus, report)
        assert witness.cut_size == 32
        assert witness.cut_size <= report.f_size
