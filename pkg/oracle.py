"""
Exact enumeration over all 2^|E| configurations of tiny graphs

Event probabilities are kept as level counts N_k, so P_p(A) is the polynomial
sum_k N_k p^k (1-p)^(|E|-k): exact at rational p, compensated at real p.
"""

import logging
import math
from fractions import Fraction
from numbers import Rational
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.sparse import csgraph

import graphs
from errors import (
    ContractViolationError, InvalidInstanceError, InvalidParameterError, NoThresholdError,
    NotMonotoneError, SizeLimitError,
)
from models import (
    BatteryReport, ClusterDecomposition, Configuration, Graph, HarrisReport,
    InsertionToleranceReport, LevelCounts, RussoReport,
)
from percolation import clusters, simulate
from utils import check_probability, derive_seed, size_threshold, wilson_interval

logger = logging.getLogger(__name__)

MAX_EDGES = 22
THRESHOLD_TOLERANCE = 1e-12

Predicate = Callable[[Configuration], bool]
Probability = Union[float, Fraction]


# ----------------------------------------------------------------------------
# Common events
# ----------------------------------------------------------------------------

def k1_at_least(alpha: float) -> Predicate:
    """Event {|K1|/|V| >= alpha}"""
    def predicate(omega: Configuration) -> bool:
        target = size_threshold(alpha, omega.graph.n_vertices)
        return clusters(omega.graph, omega).k1 >= target
    return predicate


def k1_equals(size: int) -> Predicate:
    def predicate(omega: Configuration) -> bool:
        return clusters(omega.graph, omega).k1 == size
    return predicate


def connects(u: int, v: int) -> Predicate:
    """Two-point event {u <-> v}"""
    def predicate(omega: Configuration) -> bool:
        labels = clusters(omega.graph, omega).labels
        return bool(labels[u] == labels[v])
    return predicate


def edge_open(e: int) -> Predicate:
    def predicate(omega: Configuration) -> bool:
        return bool(omega.open[e])
    return predicate


def always(omega: Configuration) -> bool:
    return True


def never(omega: Configuration) -> bool:
    return False


# ----------------------------------------------------------------------------
# Enumeration
# ----------------------------------------------------------------------------

def _bits_of(code: int, m: int) -> np.ndarray:
    return (code >> np.arange(m)) & 1 == 1


def _event_table(graph: Graph, predicate: Predicate, max_edges: int = MAX_EDGES) -> np.ndarray:
    """
    Truth table of the predicate indexed by configuration code (bit e = edge e open)

    Configurations are visited in Gray-code order, so consecutive
    configurations differ in a single edge.
    """
    m = graph.m_edges
    if m > max_edges:
        raise SizeLimitError(f"exact enumeration needs |E| <= {max_edges}, got {m}")

    table = np.zeros(1 << m, dtype=bool)
    mask = np.zeros(m, dtype=bool)
    code = 0
    for i in range(1 << m):
        if i:
            bit = (i & -i).bit_length() - 1
            mask[bit] = not mask[bit]
            code ^= 1 << bit
        table[code] = bool(predicate(Configuration(graph, mask.copy())))
    return table


def _popcounts(m: int) -> np.ndarray:
    codes = np.arange(1 << m)
    pop = np.zeros(1 << m, dtype=np.int64)
    for e in range(m):
        pop += (codes >> e) & 1
    return pop


def _level_counts(table: np.ndarray, m: int, pop: Optional[np.ndarray] = None) -> LevelCounts:
    pop = _popcounts(m) if pop is None else pop
    return LevelCounts(m_edges=m, counts=tuple(np.bincount(pop[table], minlength=m + 1).tolist()))


def _check_increasing(table: np.ndarray, m: int):
    """Raise NotMonotoneError on any single-edge flip that leaves the event"""
    codes = np.arange(1 << m)
    for e in range(m):
        low = codes[(codes >> e) & 1 == 0]
        bad = table[low] & ~table[low | (1 << e)]
        if bad.any():
            witness = low[np.argmax(bad)]
            raise NotMonotoneError(
                f"event holds on a configuration but not after opening edge {e}",
                witness=np.flatnonzero(_bits_of(int(witness), m)).tolist(),
            )


def exact_event(graph: Graph, predicate: Predicate, max_edges: int = MAX_EDGES) -> LevelCounts:
    """
    Exact level counts of an event by exhaustive enumeration

    Args:
        graph: Host graph with at most max_edges edges
        predicate: Event as a function of the configuration

    Returns:
        LevelCounts

    Raises:
        SizeLimitError: If |E| > max_edges
    """
    table = _event_table(graph, predicate, max_edges)
    counts = _level_counts(table, graph.m_edges)
    logger.debug(f"Enumerated {1 << graph.m_edges} configurations of {graph.family_tag}")
    return counts


def _is_exact(p) -> bool:
    return isinstance(p, Rational)


def evaluate(lc: LevelCounts, p: Probability) -> Probability:
    """
    P_p(A) from level counts

    Exact Fraction when p is rational (int or Fraction), compensated float
    summation otherwise.
    """
    m = lc.m_edges
    if _is_exact(p):
        p = Fraction(p)
        if not 0 <= p <= 1:
            raise InvalidParameterError(f"p must lie in [0, 1], got {p}")
        q = 1 - p
        return sum((n * p ** k * q ** (m - k) for k, n in enumerate(lc.counts) if n), Fraction(0))
    p = check_probability(p)
    q = 1.0 - p
    return math.fsum(n * p ** k * q ** (m - k) for k, n in enumerate(lc.counts) if n)


def derivative(lc: LevelCounts, p: Probability) -> Probability:
    """d/dp P_p(A) from the closed-form polynomial derivative"""
    m = lc.m_edges
    exact = _is_exact(p)
    p = Fraction(p) if exact else check_probability(p)
    q = 1 - p
    terms = []
    for k, n in enumerate(lc.counts):
        if not n:
            continue
        if k > 0:
            terms.append(n * k * p ** (k - 1) * q ** (m - k))
        if k < m:
            terms.append(-n * (m - k) * p ** k * q ** (m - k - 1))
    if exact:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


def exact_threshold(lc: LevelCounts, delta: float,
                    tolerance: float = THRESHOLD_TOLERANCE) -> float:
    """
    The p with P_p(A) = delta for a nontrivial increasing event

    Bisection on the exact polynomial; P_p(A) is strictly increasing on [0, 1]
    when A is increasing with A never holding at p = 0 and always at p = 1.

    Raises:
        NoThresholdError: If the event is trivial
    """
    delta = float(check_probability(delta, "delta", open_low=True, open_high=True))
    if lc.counts[0] != 0 or lc.counts[-1] != 1:
        raise NoThresholdError("event holds always or never at the endpoints; no threshold")

    lo, hi = 0.0, 1.0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if evaluate(lc, mid) < delta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def russo_decomposition(graph: Graph, predicate: Predicate,
                        max_edges: int = MAX_EDGES) -> RussoReport:
    """
    Pivotal counts per edge and the exact check f'(p) = sum_e P_p(e pivotal)

    The identity is tested at |E|+1 distinct rationals, which pins down the
    degree-|E| polynomials on both sides.

    Raises:
        NotMonotoneError: If the event is not increasing
        ContractViolationError: If the identity fails
    """
    m = graph.m_edges
    table = _event_table(graph, predicate, max_edges)
    _check_increasing(table, m)
    pop = _popcounts(m)
    event = _level_counts(table, m, pop)

    codes = np.arange(1 << m)
    pivotal = []
    for e in range(m):
        bit = 1 << e
        flips = table[codes | bit] != table[codes & ~bit]
        pivotal.append(_level_counts(flips, m, pop))

    points = [Fraction(j + 1, m + 2) for j in range(m + 1)]
    for x in points:
        lhs = derivative(event, x)
        rhs = sum((evaluate(lc, x) for lc in pivotal), Fraction(0))
        if lhs != rhs:
            raise ContractViolationError(f"derivative identity fails at p={x}: {lhs} != {rhs}")
    return RussoReport(event=event, pivotal=pivotal, points=points, holds=True)


def harris_check(graph: Graph, event_a: Predicate, event_b: Predicate,
                 p_list: Iterable[Probability], max_edges: int = MAX_EDGES) -> HarrisReport:
    """
    Exact P(A and B) >= P(A) P(B) at each parameter

    Raises:
        NotMonotoneError: If either event is not increasing
    """
    m = graph.m_edges
    table_a = _event_table(graph, event_a, max_edges)
    table_b = _event_table(graph, event_b, max_edges)
    _check_increasing(table_a, m)
    _check_increasing(table_b, m)
    pop = _popcounts(m)
    lc_a = _level_counts(table_a, m, pop)
    lc_b = _level_counts(table_b, m, pop)
    lc_ab = _level_counts(table_a & table_b, m, pop)

    rows = []
    for p in p_list:
        joint = evaluate(lc_ab, p)
        product = evaluate(lc_a, p) * evaluate(lc_b, p)
        holds = joint >= product if _is_exact(p) else joint >= product - 1e-12
        rows.append({"p": str(p), "joint": str(joint), "product": str(product), "holds": bool(holds)})
    return HarrisReport(rows=rows)


def insertion_tolerance_check(graph: Graph, event: Predicate, f_edges: Sequence[int],
                              f_rule: Callable[[Configuration], Iterable[int]],
                              eta: Probability, p: Probability,
                              max_edges: int = MAX_EDGES) -> InsertionToleranceReport:
    """
    Exact check of P(A+) >= eta^2/(1-p) * p|F|/(p|F|+1) * P(A)^2

    A+ collects omega + {e} for omega in A and e in f_rule(omega).

    Raises:
        InvalidInstanceError: If some omega in A has f_rule(omega) outside
            F minus omega, or smaller than eta|F|; the witness lists its open edges
    """
    m = graph.m_edges
    exact = _is_exact(p) and _is_exact(eta)
    if exact:
        p, eta = Fraction(p), Fraction(eta)
    else:
        p, eta = float(p), float(eta)
    if not 0 <= p < 1:
        raise InvalidParameterError(f"p must lie in [0, 1), got {p}")

    table = _event_table(graph, event, max_edges)
    f_set = set(int(e) for e in f_edges)
    plus = np.zeros_like(table)
    for code in np.flatnonzero(table).tolist():
        mask = _bits_of(code, m)
        rule = set(int(e) for e in f_rule(Configuration(graph, mask)))
        open_now = set(np.flatnonzero(mask).tolist())
        if not rule <= f_set - open_now or len(rule) < eta * len(f_set):
            raise InvalidInstanceError(
                "insertion rule violates its precondition on a configuration of A",
                witness=sorted(open_now),
            )
        for e in rule:
            plus[code | (1 << e)] = True

    pop = _popcounts(m)
    p_event = evaluate(_level_counts(table, m, pop), p)
    p_plus = evaluate(_level_counts(plus, m, pop), p)
    size = len(f_set)
    bound = eta * eta / (1 - p) * (p * size / (p * size + 1)) * p_event * p_event
    holds = p_plus >= bound if exact else p_plus >= bound - 1e-12
    return InsertionToleranceReport(p_event=p_event, p_plus=p_plus, bound=bound, holds=bool(holds))


# ----------------------------------------------------------------------------
# Cross-validation battery
# ----------------------------------------------------------------------------

BATTERY_P = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


def battery_graphs() -> List[Graph]:
    return (
        [graphs.cycle(n) for n in range(3, 7)]
        + [graphs.complete(n) for n in range(3, 6)]
        + [graphs.hypercube(3), graphs.path_pair()]
    )


def _farthest_from_zero(graph: Graph) -> int:
    dist = csgraph.shortest_path(graph.adjacency_matrix, unweighted=True, directed=False, indices=0)
    return int(np.argmax(dist))


def _battery_hits(graph: Graph, p: float, far: int, target: int,
                  replicas: int, seed: int, threads: Optional[int]):
    """Counts of {|K1| >= target} and {0 <-> far} over direct simulation replicas"""
    def linked(omega: Configuration, decomposition: ClusterDecomposition) -> bool:
        return bool(decomposition.labels[0] == decomposition.labels[far])

    rows = simulate(graph, p, replicas, seed, flags={"linked": linked}, threads=threads)
    giant = sum(1 for row in rows if row.k1 >= target)
    return giant, sum(1 for row in rows if row.flags["linked"])


def validate_battery(replicas: int = 100_000, seed: int = 0, alpha: float = 0.5,
                     confidence: float = 0.95, n_sigma: float = 3.0,
                     russo_alphas: Sequence[float] = (0.5, 0.75, 1.0),
                     threads: Optional[int] = None) -> BatteryReport:
    """
    Cross-check Monte Carlo against exact enumeration on the tiny-graph battery

    For each battery graph and p in {1/4, 1/2, 3/4}, estimates P(|K1| >= alpha)
    and the two-point function between vertex 0 and a farthest vertex, and
    checks each estimate lies within n_sigma Wilson half-widths of the exact
    value. The Russo identity is verified on every graph for each alpha in
    russo_alphas.
    """
    rows: List[Dict[str, object]] = []
    russo_rows: List[Dict[str, object]] = []

    for graph in battery_graphs():
        far = _farthest_from_zero(graph)
        target = size_threshold(alpha, graph.n_vertices)
        lc_giant = exact_event(graph, k1_at_least(alpha))
        lc_link = exact_event(graph, connects(0, far))

        for p in BATTERY_P:
            cell_seed = derive_seed(seed, graph.family_tag, str(p))
            giant, linked = _battery_hits(graph, float(p), far, target, replicas, cell_seed, threads)
            for name, lc, hits in (("k1", lc_giant, giant), ("two-point", lc_link, linked)):
                exact = float(evaluate(lc, p))
                estimate, lo, hi = wilson_interval(hits, replicas, confidence)
                half = 0.5 * (hi - lo)
                rows.append({
                    "graph": graph.family_tag, "event": name, "p": float(p),
                    "exact": exact, "estimate": estimate, "ci_lo": lo, "ci_hi": hi,
                    "passed": abs(estimate - exact) <= n_sigma * half,
                })

        for a in russo_alphas:
            report = russo_decomposition(graph, k1_at_least(a))
            russo_rows.append({"graph": graph.family_tag, "alpha": a, "holds": report.holds})

    report = BatteryReport(rows=rows, russo=russo_rows)
    logger.info(f"Oracle battery: {report.pass_fraction:.1%} of {len(rows)} cells passed")
    return report
