"""
Monotone coupling of P_q and P_p and the measurable primitives built on it:
sandcastle scores and frequencies, localization, activation
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

import graphs
import runner
from errors import ContractViolationError, InvalidParameterError
from models import (
    BoundCheck, ClusterDecomposition, Configuration, CoupledPair, Graph, ProportionEstimate,
    SandcastleFrequency, SandcastleReport, Subgraph, as_index_array,
)
from percolation import UnionFind, clusters, decompose, edge_uniforms, sample, two_point_profile
from utils import (
    check_positive_int, check_probability, derive_seed, size_threshold, stream_generator,
    wilson_interval,
)

logger = logging.getLogger(__name__)

INNER_REPLICAS = 64
SANDCASTLE_THRESHOLD = 0.5
PROBE_COUNT = 8


def _proportion(successes: float, trials: int, confidence: float = 0.95) -> ProportionEstimate:
    estimate, lo, hi = wilson_interval(successes, trials, confidence)
    return ProportionEstimate(successes, trials, estimate, lo, hi)


def sample_coupled(graph: Graph, q: float, p: float, seed: int, stream: int = 0) -> CoupledPair:
    """
    Sample (omega_q, omega_p) from shared per-edge uniforms

    omega_p coincides with percolation.sample(graph, p, seed, stream).

    Raises:
        InvalidParameterError: If q > p
    """
    q, p = check_probability(q, "q"), check_probability(p, "p")
    if q > p:
        raise InvalidParameterError(f"coupling needs q <= p, got q={q}, p={p}")
    uniforms = edge_uniforms(graph, seed, stream)
    pair = CoupledPair(
        q=q, p=p,
        omega_q=Configuration(graph, uniforms < q),
        omega_p=Configuration(graph, uniforms < p),
    )
    if not pair.omega_q.is_subset_of(pair.omega_p):
        raise ContractViolationError("coupled configurations are not nested")
    return pair


# ----------------------------------------------------------------------------
# Sandcastles
# ----------------------------------------------------------------------------

def _local_graph(graph: Graph, subgraph: Subgraph) -> Graph:
    """S relabelled to 0..|V(S)|-1; raises InvalidParameterError if disconnected"""
    vertices = as_index_array(subgraph.vertices, graph.n_vertices, "subgraph vertices")
    if vertices.size == 0:
        raise InvalidParameterError("subgraph must have at least one vertex")
    index = np.full(graph.n_vertices, -1, dtype=np.int64)
    index[vertices] = np.arange(vertices.size)
    local = index[graph.edges[np.asarray(subgraph.edges, dtype=np.int64)]]
    if np.any(local < 0):
        raise ContractViolationError("subgraph edges leave its vertex set")
    return graphs.build_graph(vertices.size, local, family="subgraph")


def sandcastle_score(graph: Graph, subgraph: Subgraph, q: float, p: float, alpha: float,
                     replicas: int = INNER_REPLICAS, seed: int = 0, stream: int = 0,
                     beta: float = 0.0, threshold: float = SANDCASTLE_THRESHOLD,
                     confidence: float = 0.95) -> SandcastleReport:
    """
    Estimate P(|K1(omega_q within S)|/|V| < alpha given S open in omega_p)

    Given S open at p, each edge of S survives to omega_q independently with
    probability q/p, so only S is resampled.

    Args:
        graph: Host graph
        subgraph: Connected subgraph S
        q, p: Coupled parameters with q <= p and p > 0
        alpha: Shattering density
        replicas: Inner samples
        seed, stream: Inner random stream
        beta: Density S must reach to count as a sandcastle
        threshold: Probability the Wilson lower bound of the score must reach

    Raises:
        InvalidParameterError: If S is disconnected or the parameters are invalid
    """
    q, p = check_probability(q, "q"), check_probability(p, "p", open_low=True)
    if q > p:
        raise InvalidParameterError(f"sandcastle needs q <= p, got q={q}, p={p}")
    check_positive_int(replicas, "replicas")
    local = _local_graph(graph, subgraph)
    density = local.n_vertices / graph.n_vertices
    target = size_threshold(alpha, graph.n_vertices)

    keep = stream_generator(seed, stream).random((replicas, local.m_edges)) < q / p
    shattered = sum(decompose(local, row).k1 < target for row in keep)
    score = _proportion(shattered, replicas, confidence)
    return SandcastleReport(
        density=density, score=score,
        is_sandcastle=bool(density >= beta and score.ci_lo >= threshold),
        n_vertices=local.n_vertices,
    )


def default_probes(graph: Graph, count: int = PROBE_COUNT) -> List[int]:
    """count vertices spread evenly over the index range"""
    return sorted(set(np.linspace(0, graph.n_vertices - 1, count).round().astype(int).tolist()))


def sandcastle_frequency(graph: Graph, p: float, q: float, alpha: float, beta: float,
                         replicas: int, seed: int = 0,
                         inner_replicas: int = INNER_REPLICAS,
                         probes: Optional[Sequence[int]] = None,
                         threshold: float = SANDCASTLE_THRESHOLD,
                         confidence: float = 0.95,
                         threads: Optional[int] = None) -> SandcastleFrequency:
    """
    Frequency of K_u being a [(p, beta) -> (q, alpha)]-sandcastle per probe u

    Also estimates P_p(|K2| >= beta) on the same outer samples and
    P_q(|K2| >= alpha) on independent ones, giving the right-hand side
    beta [P_p(|K2| >= beta) - 4 P_q(|K2| >= alpha)].
    """
    p = check_probability(p, "p", open_low=True)
    q = check_probability(q, "q")
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if beta <= 0:
        raise InvalidParameterError(f"beta must be positive, got {beta}")
    check_positive_int(replicas, "replicas")
    probes = default_probes(graph) if probes is None else [int(u) for u in probes]

    outer_seed = derive_seed(seed, "sandcastle-outer")
    inner_seed = derive_seed(seed, "sandcastle-inner")
    k2_beta = size_threshold(beta, graph.n_vertices) if beta <= 1 else graph.n_vertices + 1
    k2_alpha = size_threshold(alpha, graph.n_vertices)

    def outer(r: int) -> Dict[str, Any]:
        omega = sample(graph, p, outer_seed, r)
        decomposition = clusters(graph, omega)
        scored: Dict[int, SandcastleReport] = {}
        rows = []
        for u in probes:
            label = int(decomposition.labels[u])
            members = decomposition.members(label)
            density = members.size / graph.n_vertices
            if density < beta:
                hit, score = False, None
            else:
                if label not in scored:
                    subgraph = graphs.induced_subgraph(graph, members, omega.open)
                    scored[label] = sandcastle_score(
                        graph, subgraph, q, p, alpha, inner_replicas, inner_seed,
                        stream=r * graph.n_vertices + label,
                        beta=beta, threshold=threshold, confidence=confidence,
                    )
                hit, score = scored[label].is_sandcastle, scored[label].score.estimate
            rows.append({
                "replica": r, "probe": u, "cluster_size": int(members.size),
                "density": density, "score": score, "is_sandcastle": hit,
            })
        return {"rows": rows, "k2_beta": decomposition.k2 >= k2_beta}

    results = runner.run_replicas(outer, replicas, threads=threads, desc="sandcastle replicas")

    q_seed = derive_seed(seed, "sandcastle-q")

    def q_task(r: int) -> bool:
        return clusters(graph, sample(graph, q, q_seed, r)).k2 >= k2_alpha

    q_hits = sum(runner.run_replicas(q_task, replicas, threads=threads))

    rows = [row for result in results for row in result["rows"]]
    frequencies = []
    for i, _u in enumerate(probes):
        hits = sum(result["rows"][i]["is_sandcastle"] for result in results)
        frequencies.append(_proportion(hits, replicas, confidence))

    report = SandcastleFrequency(
        probes=probes, frequencies=frequencies,
        p_k2_beta=_proportion(sum(r["k2_beta"] for r in results), replicas, confidence),
        q_k2_alpha=_proportion(q_hits, replicas, confidence),
        beta=beta, rows=rows,
    )
    logger.info(
        f"Sandcastle frequency sup {report.supremum.estimate:.4f} against rhs {report.rhs:.4f}"
    )
    return report


# ----------------------------------------------------------------------------
# Localization
# ----------------------------------------------------------------------------

def localization_probability(graph: Graph, subgraph: Union[Subgraph, Sequence[int]],
                             q: float, beta: float, replicas: int, seed: int = 0,
                             confidence: float = 0.95,
                             threads: Optional[int] = None) -> BoundCheck:
    """
    Estimate P_q(|K1(omega minus H-bar)| >= beta), H-bar the edges touching V(H)

    The returned bound is the localization estimate
    (2 - b^2) / (2b P(|K1| >= b) - b^2) * [P(|K1| outside (b, b + b^2 |H|/2)) + P(|K2| >= b)]
    with b = beta and |H| = |V(H)|/|V|, evaluated on the same samples; it is
    infinite when the denominator is not positive.
    """
    q = check_probability(q, "q")
    check_positive_int(replicas, "replicas")
    vertices = subgraph.vertices if isinstance(subgraph, Subgraph) else subgraph
    vertices = as_index_array(vertices, graph.n_vertices)
    removed = graphs.incident_edge_set(graph, vertices)
    keep = np.ones(graph.m_edges, dtype=bool)
    keep[removed] = False

    n = graph.n_vertices
    h_density = vertices.size / n
    target = size_threshold(beta, n)
    stream_seed = derive_seed(seed, "localization")

    def task(r: int):
        omega = sample(graph, q, stream_seed, r)
        full = clusters(graph, omega)
        local = decompose(graph, omega.open & keep)
        k1_density = full.k1 / n
        outside = not (beta < k1_density < beta + beta * beta * h_density / 2)
        return local.k1 >= target, full.k1 >= target, outside, full.k2 >= target

    results = runner.run_replicas(task, replicas, threads=threads, desc="localization")
    counts = np.sum(np.asarray(results, dtype=np.int64), axis=0)
    localized, giant, outside, second = (_proportion(c, replicas, confidence) for c in counts)

    denominator = 2 * beta * giant.estimate - beta * beta
    if denominator > 0:
        factor = (2 - beta * beta) / denominator
        bound = factor * (outside.estimate + second.estimate)
        sigma = math.sqrt(localized.std_error ** 2
                          + factor ** 2 * (outside.std_error ** 2 + second.std_error ** 2))
    else:
        bound, sigma = math.inf, 0.0
    return BoundCheck(estimate=localized, bound=bound, sigma=sigma)


# ----------------------------------------------------------------------------
# Activation
# ----------------------------------------------------------------------------

def _activated(decomposition: ClusterDecomposition, graph: Graph, h_edges: np.ndarray, target: int) -> bool:
    """Whether adding the edges H lifts |K1| from below target to at least target"""
    if decomposition.k1 >= target:
        return False
    uf = UnionFind(decomposition.n_clusters, decomposition.sizes)
    labels = decomposition.labels
    largest = decomposition.k1
    for u, v in graph.edges[h_edges].tolist():
        merged = uf.union(int(labels[u]), int(labels[v]))
        if merged is not None:
            largest = max(largest, merged[0] + merged[1])
            if largest >= target:
                return True
    return False


def activation_event(h_edges: Sequence[int], alpha: float):
    """Predicate {omega not in A but omega with H in A} for A = {|K1| >= alpha}"""
    h = np.asarray(list(h_edges), dtype=np.int64)

    def predicate(omega: Configuration) -> bool:
        target = size_threshold(alpha, omega.graph.n_vertices)
        return _activated(clusters(omega.graph, omega), omega.graph, h, target)

    return predicate


def activator_probability(graph: Graph, h_edges: Sequence[int], alpha: float, p: float,
                          replicas: int, seed: int = 0, confidence: float = 0.95,
                          threads: Optional[int] = None) -> ProportionEstimate:
    """
    Estimate P_p(act_alpha(H)): |K1(omega)| below alpha but |K1(omega with H)| at least alpha

    Raises:
        ContractViolationError: If H references edges outside the graph
    """
    p = check_probability(p)
    check_positive_int(replicas, "replicas")
    h = as_index_array(h_edges, graph.m_edges, "edge set H")
    target = size_threshold(alpha, graph.n_vertices)
    stream_seed = derive_seed(seed, "activation")

    def task(r: int) -> bool:
        if h.size == 0:
            return False
        return _activated(clusters(graph, sample(graph, p, stream_seed, r)), graph, h, target)

    hits = sum(runner.run_replicas(task, replicas, threads=threads, desc="activation"))
    return _proportion(hits, replicas, confidence)


# ----------------------------------------------------------------------------
# Concentration and uniqueness
# ----------------------------------------------------------------------------

def concentration_uniqueness_check(graph: Graph, q: float, delta: float, replicas: int,
                                   seed: int = 0, alpha: Optional[float] = None,
                                   two_point_replicas: Optional[int] = None,
                                   confidence: float = 0.95,
                                   threads: Optional[int] = None) -> BoundCheck:
    """
    Check P_q(|K2| >= 2 delta) <= (1 + 1/(4 delta^2 tau)) P_q(| |K1| - alpha | >= delta)

    tau is the measured minimum two-point function from vertex 0; alpha
    defaults to the sample median of |K1|/|V|.
    """
    q = check_probability(q, "q")
    if delta <= 0:
        raise InvalidParameterError(f"delta must be positive, got {delta}")
    check_positive_int(replicas, "replicas")
    n = graph.n_vertices
    stream_seed = derive_seed(seed, "concentration")

    def task(r: int):
        decomposition = clusters(graph, sample(graph, q, stream_seed, r))
        return decomposition.k1 / n, decomposition.k2 / n

    samples = np.asarray(runner.run_replicas(task, replicas, threads=threads), dtype=float)
    k1, k2 = samples[:, 0], samples[:, 1]
    if alpha is None:
        alpha = float(np.median(k1))

    second = _proportion(int(np.count_nonzero(k2 >= 2 * delta)), replicas, confidence)
    spread = _proportion(int(np.count_nonzero(np.abs(k1 - alpha) >= delta)), replicas, confidence)
    tau = two_point_profile(graph, q, 0, two_point_replicas or replicas,
                            derive_seed(seed, "tau"), confidence, threads).minimum

    if tau <= 0:
        return BoundCheck(estimate=second, bound=math.inf, sigma=0.0)
    factor = 1 + 1 / (4 * delta * delta * tau)
    sigma = math.sqrt(second.std_error ** 2 + factor ** 2 * spread.std_error ** 2)
    return BoundCheck(estimate=second, bound=factor * spread.estimate, sigma=sigma)
