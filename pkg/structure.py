"""
Balanced separators, molecular decompositions and density ratios
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

import runner
from errors import (
    ContractViolationError, InvalidParameterError, SizeLimitError, UnsupportedGraphError,
)
from models import DensityReport, Graph, MolecularReport, SeparatorResult, as_index_array
from utils import derive_seed, stream_generator

logger = logging.getLogger(__name__)

EXACT_MAX_VERTICES = 24
MAX_ORBITS = 18
RESTARTS = 32
DENSE_FLOOR = 0.05
MASK_CHUNK = 1 << 18


def boundary_size(graph: Graph, side_a: Sequence[int]) -> int:
    """Number of edges with exactly one endpoint in side_a"""
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[as_index_array(side_a, graph.n_vertices)] = True
    return int(np.count_nonzero(inside[graph.edges[:, 0]] != inside[graph.edges[:, 1]]))


def degree_share(graph: Graph, side_a: Sequence[int]) -> float:
    """Sum of deg(v) over side_a divided by 2|E|"""
    side = as_index_array(side_a, graph.n_vertices)
    return float(graph.degrees[side].sum()) / float(graph.degrees.sum())


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not 0 < theta <= 0.5:
        raise InvalidParameterError(f"theta must lie in (0, 1/2], got {theta}")
    return theta


def _exact_separator(graph: Graph, theta: float) -> Tuple[int, np.ndarray]:
    """
    Minimum cut over degree-balanced bipartitions by full enumeration

    Vertex 0 is kept outside A (complements give the same cut), so codes run
    over the remaining n-1 vertices; ties go to the smallest code.
    """
    n = graph.n_vertices
    weights = graph.degrees.astype(np.int64)
    total = int(weights.sum())
    low, high = theta * total - 1e-9, (1 - theta) * total + 1e-9
    u, v = graph.edges[:, 0], graph.edges[:, 1]

    best_cut, best_code = None, None
    n_codes = 1 << (n - 1)
    for start in range(0, n_codes, MASK_CHUNK):
        codes = np.arange(start, min(start + MASK_CHUNK, n_codes), dtype=np.int64)
        bits = np.zeros((codes.size, n), dtype=bool)
        for vertex in range(1, n):
            bits[:, vertex] = (codes >> (vertex - 1)) & 1
        share = bits.astype(np.int64) @ weights
        feasible = (share >= low) & (share <= high)
        if not feasible.any():
            continue
        cuts = np.count_nonzero(bits[:, u] != bits[:, v], axis=1)
        cuts = np.where(feasible, cuts, np.iinfo(np.int64).max)
        i = int(np.argmin(cuts))
        if feasible[i] and (best_cut is None or cuts[i] < best_cut):
            best_cut, best_code = int(cuts[i]), int(codes[i])

    if best_cut is None:
        raise ContractViolationError(f"no bipartition of {graph.family_tag} is {theta}-balanced")
    side = [vertex for vertex in range(1, n) if (best_code >> (vertex - 1)) & 1]
    return best_cut, np.asarray(side, dtype=np.int64)


class _LocalSearch:
    """Single-vertex moves inside the balance window with annealed acceptance"""

    def __init__(self, graph: Graph, theta: float, iterations: int):
        self.graph = graph
        self.weights = graph.degrees.astype(float)
        self.total = float(self.weights.sum())
        self.low = theta * self.total - 1e-9
        self.high = (1 - theta) * self.total + 1e-9
        self.iterations = iterations

    def _grow(self, rng: np.random.Generator) -> Optional[np.ndarray]:
        """Breadth-first region from a random vertex until the share reaches the window"""
        graph = self.graph
        inside = np.zeros(graph.n_vertices, dtype=bool)
        start = int(rng.integers(graph.n_vertices))
        queue, head, share = [start], 0, 0.0
        inside[start] = True
        share += self.weights[start]
        while share < self.low and head < len(queue):
            for w in graph.neighbors_of(queue[head]).tolist():
                if share >= self.low:
                    break
                if not inside[w]:
                    inside[w] = True
                    share += self.weights[w]
                    queue.append(w)
            head += 1
        return inside if self.low <= share <= self.high else None

    def _gain(self, inside: np.ndarray, v: int) -> int:
        """Change of the cut if v switches side"""
        nbrs = self.graph.neighbors_of(v)
        same = int(np.count_nonzero(inside[nbrs] == inside[v]))
        return same - (nbrs.size - same)

    def run(self, rng: np.random.Generator) -> Optional[Tuple[int, np.ndarray]]:
        inside = self._grow(rng)
        if inside is None:
            return None
        graph = self.graph
        share = float(self.weights[inside].sum())
        cut = int(np.count_nonzero(inside[graph.edges[:, 0]] != inside[graph.edges[:, 1]]))
        best_cut, best = cut, inside.copy()

        temperature, cooling = 2.0, (0.01 / 2.0) ** (1.0 / max(self.iterations, 1))
        for _ in range(self.iterations):
            v = int(rng.integers(graph.n_vertices))
            new_share = share - self.weights[v] if inside[v] else share + self.weights[v]
            if not self.low <= new_share <= self.high:
                continue
            delta = self._gain(inside, v)
            if delta <= 0 or rng.random() < math.exp(-delta / temperature):
                inside[v] = not inside[v]
                share, cut = new_share, cut + delta
                if cut < best_cut:
                    best_cut, best = cut, inside.copy()
            temperature *= cooling

        # greedy descent from the best state
        inside, cut = best, best_cut
        share = float(self.weights[inside].sum())
        improved = True
        while improved:
            improved = False
            for v in range(graph.n_vertices):
                new_share = share - self.weights[v] if inside[v] else share + self.weights[v]
                if self.low <= new_share <= self.high and self._gain(inside, v) < 0:
                    cut += self._gain(inside, v)
                    inside[v] = not inside[v]
                    share = new_share
                    improved = True
        return cut, np.flatnonzero(inside)


def separator(graph: Graph, theta: float, mode: str = "exact",
              restarts: int = RESTARTS, iterations: Optional[int] = None, seed: int = 0,
              max_exact_vertices: int = EXACT_MAX_VERTICES,
              threads: Optional[int] = None) -> SeparatorResult:
    """
    Minimum edge boundary over bipartitions with degree share in [theta, 1-theta]

    Args:
        graph: Host graph
        theta: Balance in (0, 1/2]
        mode: "exact" (full enumeration) or "heuristic" (annealed local search)
        restarts: Heuristic restarts
        iterations: Moves per restart (default 50 |V|, at least 2000)
        seed: Heuristic seed; restart r uses stream r

    Raises:
        SizeLimitError: Exact mode above max_exact_vertices
    """
    theta = _check_theta(theta)
    if mode == "exact":
        if graph.n_vertices > max_exact_vertices:
            raise SizeLimitError(
                f"exact separator needs |V| <= {max_exact_vertices}, got {graph.n_vertices}"
            )
        cut, side = _exact_separator(graph, theta)
        exact = True
    elif mode == "heuristic":
        search = _LocalSearch(graph, theta, iterations or max(2000, 50 * graph.n_vertices))
        restart_seed = derive_seed(seed, "separator")
        found = [r for r in runner.run_replicas(
            lambda i: search.run(stream_generator(restart_seed, i)), restarts,
            threads=threads, desc="restarts") if r is not None]
        if not found:
            raise ContractViolationError(f"no restart reached a {theta}-balanced bipartition")
        cut, side = min(found, key=lambda item: (item[0], item[1].tolist()))
        exact = False
    else:
        raise InvalidParameterError(f"unknown separator mode {mode!r}")

    if boundary_size(graph, side) != cut:
        raise ContractViolationError("separator cut size disagrees with an independent recount")
    result = SeparatorResult(theta=theta, cut_size=cut, side_a=side, exact=exact,
                             degree_weighted_share=degree_share(graph, side))
    logger.info(f"Separator({graph.family_tag}, {theta}) = {cut} ({mode})")
    return result


# ----------------------------------------------------------------------------
# Molecular decompositions
# ----------------------------------------------------------------------------

def _components_without(graph: Graph, removed: np.ndarray):
    keep = np.ones(graph.m_edges, dtype=bool)
    keep[removed] = False
    edges = graph.edges[keep]
    adjacency = sparse.coo_matrix(
        (np.ones(edges.shape[0], dtype=np.int8), (edges[:, 0], edges[:, 1])),
        shape=(graph.n_vertices, graph.n_vertices),
    )
    m, labels = csgraph.connected_components(adjacency, directed=False)
    edge_counts = np.bincount(labels[edges[:, 0]], minlength=m)
    return m, labels, edge_counts


def dense_check(graph: Graph) -> DensityReport:
    """|E|/|V|^2 and d/|V| with d = 2|E|/|V|"""
    n2 = float(graph.n_vertices) ** 2
    return DensityReport(edge_density=graph.m_edges / n2, degree_ratio=2.0 * graph.m_edges / n2)


def molecular_search(graph: Graph, c_bound: float, m_max: int = 64,
                     dense_floor: float = DENSE_FLOOR) -> Optional[MolecularReport]:
    """
    Smallest m >= 2 such that removing a union F of edge orbits with
    |F| <= C|V| leaves exactly m components, each keeping an edge

    Ties on m go to the smallest |F|, then to the first orbit subset in
    binary order.

    Raises:
        UnsupportedGraphError: If the graph has no declared edge orbits
        SizeLimitError: With more than 2^18 orbit subsets
    """
    if graph.edge_orbits is None:
        raise UnsupportedGraphError(f"{graph.family_tag} has no declared edge orbits")
    orbits = graph.edge_orbits
    k = len(orbits)
    if k > MAX_ORBITS:
        raise SizeLimitError(f"{k} orbits give more than 2^{MAX_ORBITS} subsets")
    sizes = np.array([orbit.size for orbit in orbits])
    budget = c_bound * graph.n_vertices

    best = None
    for code in range(1, 1 << k):
        chosen = [i for i in range(k) if (code >> i) & 1]
        f_size = int(sizes[chosen].sum())
        if f_size > budget:
            continue
        m, labels, edge_counts = _components_without(graph, np.concatenate([orbits[i] for i in chosen]))
        if not 2 <= m <= m_max or np.any(edge_counts == 0):
            continue
        key = (m, f_size)
        if best is None or key < best[0]:
            best = (key, chosen, labels)

    if best is None:
        logger.info(f"No molecular decomposition of {graph.family_tag} with C={c_bound}")
        return None

    (m, f_size), chosen, labels = best
    component_sizes = np.bincount(labels)
    density = dense_check(graph)
    report = MolecularReport(
        m=m, removed_orbits=tuple(chosen), f_size=f_size,
        c_ratio=f_size / graph.n_vertices,
        components_equal_size=bool(np.all(component_sizes == component_sizes[0])),
        component_sizes=tuple(int(s) for s in component_sizes),
        edge_density=density.edge_density,
        dense=density.edge_density >= dense_floor,
    )
    logger.info(f"{graph.family_tag} is {m}-molecular via orbits {list(chosen)} (|F|={f_size})")
    return report


def verify_molecular(graph: Graph, report: MolecularReport) -> bool:
    """Re-remove the reported orbits and recount the components"""
    removed = np.concatenate([graph.edge_orbits[i] for i in report.removed_orbits])
    m, _labels, _counts = _components_without(graph, removed)
    return m == report.m and int(removed.size) == report.f_size


def separator_from_molecule(graph: Graph, report: MolecularReport,
                            theta: float = 1 / 3) -> SeparatorResult:
    """
    Separator witness: the union of ceil(m/2) of the components left by F

    Its boundary lies inside F, so the cut is at most |F|.

    Raises:
        ContractViolationError: If the union is not theta-balanced
    """
    theta = _check_theta(theta)
    removed = np.concatenate([graph.edge_orbits[i] for i in report.removed_orbits])
    m, labels, _counts = _components_without(graph, removed)
    side = np.flatnonzero(labels < math.ceil(m / 2))
    share = degree_share(graph, side)
    if not theta - 1e-9 <= share <= 1 - theta + 1e-9:
        raise ContractViolationError(f"component union has share {share:.4f} outside the window")
    return SeparatorResult(theta=theta, cut_size=boundary_size(graph, side), side_a=side,
                           exact=False, degree_weighted_share=share)
