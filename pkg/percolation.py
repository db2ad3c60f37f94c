"""
Bernoulli bond percolation: sampling, cluster decomposition, permutation sweeps

Every random draw comes from a counter-based stream keyed by (seed, stream),
so replica r of a job gives the same configuration on any thread.
"""

import heapq
import logging
from collections import Counter
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

import runner
from errors import ContractViolationError, InvalidParameterError
from models import (
    ClusterDecomposition, Configuration, Graph, ReplicaRow, SweepRecord, TwoPointProfile,
    as_index_array,
)
from utils import (
    binomial_weights, check_positive_int, check_probability, stream_generator, wilson_arrays,
)

logger = logging.getLogger(__name__)

# Below this edge count clusters are found with the pure-Python union-find
UNION_FIND_MAX_EDGES = 64

SweepEvent = Callable[[int, int], bool]
FlagFn = Callable[[Configuration, ClusterDecomposition], bool]


class UnionFind:
    """Disjoint sets with union by size and path halving"""

    def __init__(self, n: int, sizes: Optional[Sequence[int]] = None):
        self.parent = list(range(n))
        self.size = [1] * n if sizes is None else [int(s) for s in sizes]

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int):
        """
        Merge the sets of a and b

        Returns:
            (size_a, size_b) of the merged roots, or None if already joined
        """
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return None
        sa, sb = self.size[ra], self.size[rb]
        if sa < sb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] = sa + sb
        return sa, sb


def _check_graph(graph: Graph, omega: Configuration):
    if omega.graph is graph:
        return
    if omega.graph.m_edges != graph.m_edges or not np.array_equal(omega.graph.edges, graph.edges):
        raise ContractViolationError("configuration belongs to a different graph")


def _canonical(raw: np.ndarray, n_components: int) -> ClusterDecomposition:
    """Relabel components by size descending, ties by smallest vertex"""
    sizes = np.bincount(raw, minlength=n_components)
    _, first = np.unique(raw, return_index=True)
    order = np.lexsort((first, -sizes))
    rank = np.empty(n_components, dtype=np.int64)
    rank[order] = np.arange(n_components)
    return ClusterDecomposition(labels=rank[raw], sizes=sizes[order])


def decompose(graph: Graph, open_mask: np.ndarray) -> ClusterDecomposition:
    """Cluster decomposition of the open subgraph given as a boolean edge mask"""
    n = graph.n_vertices
    chosen = graph.edges[open_mask]
    if graph.m_edges <= UNION_FIND_MAX_EDGES:
        uf = UnionFind(n)
        for u, v in chosen.tolist():
            uf.union(u, v)
        roots = np.fromiter((uf.find(v) for v in range(n)), dtype=np.int64, count=n)
        _, raw = np.unique(roots, return_inverse=True)
        return _canonical(raw, int(raw.max()) + 1)

    adjacency = sparse.coo_matrix(
        (np.ones(chosen.shape[0], dtype=np.int8), (chosen[:, 0], chosen[:, 1])),
        shape=(n, n),
    )
    n_components, raw = csgraph.connected_components(adjacency, directed=False)
    return _canonical(raw.astype(np.int64), n_components)


# ----------------------------------------------------------------------------
# Sampling and cluster queries
# ----------------------------------------------------------------------------

def edge_uniforms(graph: Graph, seed: int, stream: int) -> np.ndarray:
    """Per-edge uniforms U_e of stream (seed, stream); edge e is open at p iff U_e < p"""
    return stream_generator(seed, stream).random(graph.m_edges)


def sample(graph: Graph, p: float, seed: int, stream: int = 0) -> Configuration:
    """
    Sample a Bernoulli(p) bond configuration

    Args:
        graph: Host graph
        p: Edge-open probability in [0, 1]
        seed: 64-bit job seed
        stream: Replica stream index

    Returns:
        Configuration
    """
    p = check_probability(p)
    return Configuration(graph, edge_uniforms(graph, seed, stream) < p)


def clusters(graph: Graph, omega: Configuration) -> ClusterDecomposition:
    """
    Exact cluster decomposition of an open configuration

    Raises:
        ContractViolationError: If omega belongs to another graph
    """
    _check_graph(graph, omega)
    return decompose(graph, omega.open)


def connected(graph: Graph, omega: Configuration, u: int, v: int) -> bool:
    """Whether u and v lie in the same open cluster"""
    if u == v:
        return True
    labels = clusters(graph, omega).labels
    return bool(labels[u] == labels[v])


def cluster_of(graph: Graph, omega: Configuration, v: int) -> np.ndarray:
    """Sorted vertex set of the open cluster containing v"""
    return clusters(graph, omega).cluster_of(v)


def largest_intersection(graph: Graph, omega: Configuration, subset: Sequence[int]) -> int:
    """
    Largest number of vertices of a fixed set held by a single cluster

    Raises:
        InvalidParameterError: If the set is empty
    """
    subset = as_index_array(subset, graph.n_vertices)
    if subset.size == 0:
        raise InvalidParameterError("vertex set must be nonempty")
    labels = clusters(graph, omega).labels
    return int(np.bincount(labels[subset]).max())


# ----------------------------------------------------------------------------
# Permutation sweeps
# ----------------------------------------------------------------------------

class _SizeTracker:
    """Multiset of cluster sizes with exact access to the two largest"""

    def __init__(self, n: int):
        self.counts: Counter = Counter({1: n}) if n else Counter()
        self.heap: List[int] = [-1] if n else []
        self.in_heap = {1} if n else set()

    def merge(self, a: int, b: int):
        self.counts[a] -= 1
        self.counts[b] -= 1
        s = a + b
        self.counts[s] += 1
        if s not in self.in_heap:
            heapq.heappush(self.heap, -s)
            self.in_heap.add(s)

    def _prune(self):
        heap = self.heap
        while heap and self.counts[-heap[0]] == 0:
            self.in_heap.discard(-heapq.heappop(heap))

    def top_two(self):
        self._prune()
        if not self.heap:
            return 0, 0
        first = -self.heap[0]
        if self.counts[first] >= 2:
            return first, first
        top = heapq.heappop(self.heap)
        self._prune()
        second = -self.heap[0] if self.heap else 0
        heapq.heappush(self.heap, top)
        return first, second


def sweep(graph: Graph, seed: int, stream: int = 0,
          event: Optional[SweepEvent] = None,
          stop_k1: Optional[int] = None) -> SweepRecord:
    """
    Insert edges one at a time in a uniformly random order

    Records |K1|, |K2| and event(k1, k2) after each of m = 0..|E| insertions.
    Recording stops once the largest cluster spans the graph, since nothing
    changes afterwards, or when |K1| first reaches stop_k1.

    Args:
        graph: Host graph
        seed: Job seed
        stream: Replica stream
        event: Optional predicate on (k1, k2); all False when omitted
        stop_k1: Optional early-stop size

    Returns:
        SweepRecord
    """
    n = graph.n_vertices
    order = stream_generator(seed, stream).permutation(graph.m_edges)
    uf = UnionFind(n)
    tracker = _SizeTracker(n)
    edges = graph.edges

    k1, k2 = tracker.top_two()
    k1_seq = [k1]
    k2_seq = [k2]
    flags = [bool(event(k1, k2)) if event else False]

    for idx in order.tolist():
        if k1 >= n or (stop_k1 is not None and k1 >= stop_k1):
            break
        merged = uf.union(int(edges[idx, 0]), int(edges[idx, 1]))
        if merged is not None:
            tracker.merge(*merged)
            k1, k2 = tracker.top_two()
        k1_seq.append(k1)
        k2_seq.append(k2)
        flags.append(bool(event(k1, k2)) if event else False)

    return SweepRecord(
        n_vertices=n,
        m_edges=graph.m_edges,
        k1=np.asarray(k1_seq, dtype=np.int64),
        k2=np.asarray(k2_seq, dtype=np.int64),
        indicator=np.asarray(flags, dtype=bool),
        saturated=k1 >= n,
    )


def run_sweeps(graph: Graph, replicas: int, seed: int,
               event: Optional[SweepEvent] = None,
               threads: Optional[int] = None) -> List[SweepRecord]:
    """Full sweeps on streams 0..replicas-1"""
    check_positive_int(replicas, "replicas")
    return runner.run_replicas(lambda r: sweep(graph, seed, r, event=event), replicas,
                               threads=threads, desc="sweeps")


def mean_statistic(records: Sequence[SweepRecord], stat: str = "k1") -> np.ndarray:
    """Average of a padded per-m statistic across sweeps"""
    if not records:
        raise InvalidParameterError("at least one sweep is required")
    total = np.zeros(records[0].m_edges + 1, dtype=float)
    for record in records:
        total += record.padded(stat)
    return total / len(records)


def binomial_mix(records: Union[SweepRecord, Sequence[SweepRecord], np.ndarray],
                 p: float, stat: str = "k1") -> float:
    """
    Bernoulli(p) expectation of a sweep statistic

    Computes sum_m Binom(m; |E|, p) * stat[m] for one record, the average of
    several records, or a precomputed per-m array of length |E|+1.
    """
    p = check_probability(p)
    if isinstance(records, SweepRecord):
        values = records.padded(stat).astype(float)
    elif isinstance(records, np.ndarray):
        values = records.astype(float)
    else:
        values = mean_statistic(records, stat)
    weights = binomial_weights(values.shape[0] - 1, p)
    return float(np.dot(weights, values))


def crossing_points(graph: Graph, target: int, replicas: int, seed: int,
                    start: int = 0, threads: Optional[int] = None) -> np.ndarray:
    """
    Per-sweep number of inserted edges at which |K1| first reaches target

    A threshold event {|K1| >= target} holds at sweep step m iff m >= m*, so
    these indices mix to P_p(|K1| >= target) = mean_r P(Bin(|E|, p) >= m*_r).
    A sweep that never reaches target reports |E| + 1.
    """
    check_positive_int(replicas, "replicas")
    if target <= 1:
        return np.zeros(replicas, dtype=np.int64)
    if target > graph.n_vertices:
        raise InvalidParameterError(f"target {target} exceeds |V| = {graph.n_vertices}")

    def task(r: int) -> int:
        record = sweep(graph, seed, r, stop_k1=target)
        # unreachable on a disconnected graph: never crosses
        if record.k1[-1] < target:
            return graph.m_edges + 1
        return record.saturated_at

    return np.asarray(
        runner.run_replicas(task, replicas, threads=threads, desc="sweeps", start=start),
        dtype=np.int64,
    )


# ----------------------------------------------------------------------------
# Replica statistics
# ----------------------------------------------------------------------------

def simulate(graph: Graph, p: float, replicas: int, seed: int,
             flags: Optional[Dict[str, FlagFn]] = None,
             threads: Optional[int] = None) -> List[ReplicaRow]:
    """
    Direct Bernoulli(p) simulation, one row per replica

    Args:
        graph: Host graph
        p: Edge-open probability
        replicas: Number of independent configurations
        seed: Job seed; replica r uses stream r
        flags: Named event predicates evaluated on every replica
        threads: Worker count

    Returns:
        ReplicaRow list in replica order
    """
    p = check_probability(p)
    check_positive_int(replicas, "replicas")
    flags = flags or {}

    def task(r: int) -> ReplicaRow:
        omega = sample(graph, p, seed, r)
        decomposition = clusters(graph, omega)
        return ReplicaRow(
            replica=r, p=p, k1=decomposition.k1, k2=decomposition.k2,
            flags={name: bool(fn(omega, decomposition)) for name, fn in flags.items()},
        )

    rows = runner.run_replicas(task, replicas, threads=threads, desc="replicas")
    logger.debug(f"Simulated {replicas} replicas of {graph.family_tag} at p={p}")
    return rows


def intersection_samples(graph: Graph, p: float, subset: Sequence[int],
                         replicas: int, seed: int,
                         threads: Optional[int] = None) -> np.ndarray:
    """Samples of max_v |K_v intersected with subset| at parameter p"""
    p = check_probability(p)
    subset = as_index_array(subset, graph.n_vertices)
    if subset.size == 0:
        raise InvalidParameterError("vertex set must be nonempty")

    def task(r: int) -> int:
        return largest_intersection(graph, sample(graph, p, seed, r), subset)

    return np.asarray(runner.run_replicas(task, replicas, threads=threads), dtype=np.int64)


def two_point_profile(graph: Graph, p: float, source: int, replicas: int, seed: int,
                      confidence: float = 0.95,
                      threads: Optional[int] = None) -> TwoPointProfile:
    """
    Estimate P_p(source <-> v) for every vertex v

    Returns:
        TwoPointProfile with Wilson intervals and the minimum over v != source
    """
    p = check_probability(p)
    check_positive_int(replicas, "replicas")
    if not 0 <= source < graph.n_vertices:
        raise InvalidParameterError(f"source vertex {source} outside the graph")

    def task(r: int) -> np.ndarray:
        labels = clusters(graph, sample(graph, p, seed, r)).labels
        return labels == labels[source]

    hits = np.zeros(graph.n_vertices, dtype=np.int64)
    batch = 256
    for first in range(0, replicas, batch):
        count = min(batch, replicas - first)
        for row in runner.run_replicas(task, count, threads=threads, start=first):
            hits += row

    estimates, lo, hi = wilson_arrays(hits, np.full(graph.n_vertices, replicas), confidence)
    others = np.delete(np.arange(graph.n_vertices), source)
    if others.size:
        argmin = int(others[np.argmin(estimates[others])])
        minimum = float(estimates[argmin])
    else:
        argmin, minimum = source, 1.0
    return TwoPointProfile(
        source=source, p=p, replicas=replicas,
        estimates=estimates, ci_lo=lo, ci_hi=hi,
        minimum=minimum, argmin=argmin,
    )
