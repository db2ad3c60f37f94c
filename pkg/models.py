"""
Data models for the percolation laboratory
"""

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from errors import ContractViolationError


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Immutable simple graph with CSR adjacency

    Edges are stored as an (|E|, 2) array with u < v in each row; the edge
    index is the row number. ``offsets``/``neighbors``/``incident`` form a
    compressed adjacency where ``incident[k]`` is the edge index joining the
    vertex to ``neighbors[k]``.
    """
    n_vertices: int
    edges: np.ndarray
    offsets: np.ndarray
    neighbors: np.ndarray
    incident: np.ndarray
    degrees: np.ndarray
    edge_orbits: Optional[Tuple[np.ndarray, ...]]
    transitive: bool
    family: str
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def m_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def mean_degree(self) -> float:
        """d = 2|E|/|V|"""
        return 2.0 * self.m_edges / self.n_vertices

    @property
    def family_tag(self) -> str:
        if not self.params:
            return self.family
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.family}({inner})"

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def incident_edges(self, v: int) -> np.ndarray:
        return self.incident[self.offsets[v]:self.offsets[v + 1]]

    @cached_property
    def adjacency_matrix(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency in scipy CSR form"""
        data = np.ones(self.neighbors.shape[0], dtype=np.int8)
        return sparse.csr_matrix(
            (data, self.neighbors, self.offsets),
            shape=(self.n_vertices, self.n_vertices),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Serialise to the JSON graph description"""
        return {
            "family": self.family,
            "params": self.params,
            "n_vertices": self.n_vertices,
            "edges": self.edges.tolist(),
            "edge_orbits": (
                [orbit.tolist() for orbit in self.edge_orbits]
                if self.edge_orbits is not None else None
            ),
            "transitive": self.transitive,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)

    @cached_property
    def digest(self) -> str:
        """SHA-256 of the canonical JSON description"""
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


@dataclass(eq=False)
class Configuration:
    """Open/closed indicator over a graph's edge indices"""
    graph: Graph
    open: np.ndarray

    def __post_init__(self):
        self.open = np.asarray(self.open, dtype=bool)
        if self.open.shape != (self.graph.m_edges,):
            raise ContractViolationError(
                f"configuration has {self.open.shape} entries, "
                f"graph has {self.graph.m_edges} edges"
            )

    @property
    def open_edges(self) -> np.ndarray:
        return np.flatnonzero(self.open)

    @property
    def n_open(self) -> int:
        return int(np.count_nonzero(self.open))

    def is_subset_of(self, other: 'Configuration') -> bool:
        return bool(np.all(~self.open | other.open))


@dataclass
class ClusterDecomposition:
    """
    Partition of vertices into open clusters

    Cluster ids are ranks: id 0 is K1, id 1 is K2, ... ordered by size
    descending, ties broken by smallest contained vertex.
    """
    labels: np.ndarray
    sizes: np.ndarray

    @property
    def n_vertices(self) -> int:
        return int(self.labels.shape[0])

    @property
    def k1(self) -> int:
        return int(self.sizes[0])

    @property
    def k2(self) -> int:
        return int(self.sizes[1]) if self.sizes.shape[0] > 1 else 0

    @property
    def k1_density(self) -> float:
        return self.k1 / self.n_vertices

    @property
    def k2_density(self) -> float:
        return self.k2 / self.n_vertices

    @property
    def n_clusters(self) -> int:
        return int(self.sizes.shape[0])

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)

    def cluster_of(self, v: int) -> np.ndarray:
        return self.members(int(self.labels[v]))


@dataclass
class SweepRecord:
    """
    Statistics after each of m = 0..|E| insertions in a random edge order

    Arrays are stored up to ``saturated_at``: the first m where the largest
    cluster spans the graph (or the early stop index). Beyond it every
    statistic is constant, and ``padded`` restores the full |E|+1 length.
    """
    n_vertices: int
    m_edges: int
    k1: np.ndarray
    k2: np.ndarray
    indicator: np.ndarray
    saturated: bool

    @property
    def saturated_at(self) -> int:
        return int(self.k1.shape[0]) - 1

    def padded(self, stat: str = "k1") -> np.ndarray:
        values = getattr(self, stat)
        if values.shape[0] == self.m_edges + 1:
            return values
        if not self.saturated:
            raise ContractViolationError(
                "sweep was stopped early before saturation; full series unavailable"
            )
        tail = np.full(self.m_edges + 1 - values.shape[0], values[-1], dtype=values.dtype)
        return np.concatenate([values, tail])

    def at(self, stat: str, m: int) -> int:
        values = getattr(self, stat)
        if m < values.shape[0]:
            return values[m]
        return self.padded(stat)[m]


@dataclass
class ProportionEstimate:
    """Monte Carlo proportion with a Wilson score interval"""
    successes: float
    trials: int
    estimate: float
    ci_lo: float
    ci_hi: float

    @property
    def std_error(self) -> float:
        if self.trials == 0:
            return 0.0
        return float(np.sqrt(self.estimate * (1 - self.estimate) / self.trials))

    def excludes(self, value: float) -> bool:
        return value < self.ci_lo or value > self.ci_hi

    def to_dict(self) -> Dict[str, Any]:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "estimate": self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
        }


@dataclass
class ReplicaRow:
    """One replica of a direct simulation"""
    replica: int
    p: float
    k1: int
    k2: int
    flags: Dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"replica": self.replica, "p": self.p, "k1": self.k1, "k2": self.k2, **self.flags}


@dataclass
class TwoPointProfile:
    """Estimates of P_p(u <-> v) for every v"""
    source: int
    p: float
    replicas: int
    estimates: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    minimum: float
    argmin: int


@dataclass
class LevelCounts:
    """Exact counts N_k of event configurations with k open edges"""
    m_edges: int
    counts: Tuple[int, ...]

    def __post_init__(self):
        self.counts = tuple(int(c) for c in self.counts)
        if len(self.counts) != self.m_edges + 1:
            raise ContractViolationError("counts must have |E|+1 entries")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_dict(self) -> Dict[str, Any]:
        return {"m_edges": self.m_edges, "counts": [str(c) for c in self.counts]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LevelCounts':
        return cls(m_edges=int(data["m_edges"]), counts=tuple(int(c) for c in data["counts"]))


@dataclass
class RussoReport:
    """Per-edge pivotal counts and the exact derivative identity"""
    event: LevelCounts
    pivotal: List[LevelCounts]
    points: List[Fraction]
    holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "event": self.event.to_dict(),
            "pivotal": [lc.to_dict() for lc in self.pivotal],
            "points": [str(x) for x in self.points],
            "holds": self.holds,
        }


@dataclass
class HarrisReport:
    """P(A and B) against P(A) P(B) at each parameter"""
    rows: List[Dict[str, Any]]

    @property
    def holds(self) -> bool:
        return all(row["holds"] for row in self.rows)


@dataclass
class InsertionToleranceReport:
    """Exact P(A+) against the quantitative insertion-tolerance bound"""
    p_event: Any
    p_plus: Any
    bound: Any
    holds: bool

    @property
    def slack(self):
        return self.p_plus - self.bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p_event": str(self.p_event), "p_plus": str(self.p_plus),
            "bound": str(self.bound), "slack": str(self.slack), "holds": self.holds,
        }


@dataclass
class BatteryReport:
    """Monte Carlo against exact values over the tiny-graph battery"""
    rows: List[Dict[str, Any]]
    russo: List[Dict[str, Any]]
    required_fraction: float = 0.95

    @property
    def pass_fraction(self) -> float:
        if not self.rows:
            return 1.0
        return sum(row["passed"] for row in self.rows) / len(self.rows)

    @property
    def passed(self) -> bool:
        return self.pass_fraction >= self.required_fraction and all(r["holds"] for r in self.russo)


@dataclass
class EmpiricalCurve:
    """Monte Carlo estimate of f(p) = P_p(|K1| >= alpha) on a grid"""
    alpha: float
    p_grid: np.ndarray
    successes: np.ndarray
    trials: np.ndarray
    f_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    method: str = "sweep"

    @property
    def raw(self) -> np.ndarray:
        return self.successes / self.trials

    def __call__(self, p: float) -> float:
        """Piecewise-linear interpolation of the isotonic estimate"""
        return float(np.interp(p, self.p_grid, self.f_hat))

    def rows(self) -> List[Dict[str, float]]:
        return [
            {
                "p": float(p), "trials": int(t), "successes": float(s),
                "f_hat": float(f), "ci_lo": float(lo), "ci_hi": float(hi),
            }
            for p, t, s, f, lo, hi in zip(
                self.p_grid, self.trials, self.successes, self.f_hat, self.ci_lo, self.ci_hi
            )
        ]


@dataclass
class ThresholdEstimate:
    """Estimate of p_c(alpha, delta) with a confidence bracket"""
    alpha: float
    delta: float
    p_hat: float
    p_lo: float
    p_hi: float
    replicas_used: int
    inconclusive: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha, "delta": self.delta, "p_hat": self.p_hat,
            "p_lo": self.p_lo, "p_hi": self.p_hi,
            "replicas_used": self.replicas_used, "inconclusive": self.inconclusive,
        }


@dataclass
class SharpnessRatio:
    """p_c(beta, 1-delta) / p_c(beta, delta) with bracket"""
    beta: float
    delta: float
    ratio: float
    ratio_lo: float
    ratio_hi: float
    lower: ThresholdEstimate
    upper: ThresholdEstimate

    @property
    def inconclusive(self) -> bool:
        return self.lower.inconclusive or self.upper.inconclusive

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": self.beta, "delta": self.delta, "ratio": self.ratio,
            "ratio_lo": self.ratio_lo, "ratio_hi": self.ratio_hi,
            "lower": self.lower.to_dict(), "upper": self.upper.to_dict(),
            "inconclusive": self.inconclusive,
        }


@dataclass
class SupercriticalVerdict:
    """Evidence for p being epsilon-supercritical"""
    p: float
    epsilon: float
    size_clause: bool
    supercritical: bool
    inconclusive: bool
    evidence: Optional[ProportionEstimate] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p, "epsilon": self.epsilon, "size_clause": self.size_clause,
            "supercritical": self.supercritical, "inconclusive": self.inconclusive,
            "evidence": self.evidence.to_dict() if self.evidence else None,
        }


@dataclass
class QSetEstimate:
    """Interval I = [p_c(b,d), p_c(b,1-d)] and Q = {p in I : p f'(p) <= bound}"""
    interval: Tuple[float, float]
    cells: List[Tuple[float, float]]
    measure: float
    slope_bound: float
    derivative: np.ndarray

    @property
    def interval_measure(self) -> float:
        return self.interval[1] - self.interval[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": list(self.interval), "cells": [list(c) for c in self.cells],
            "measure": self.measure, "interval_measure": self.interval_measure,
            "slope_bound": self.slope_bound,
        }


@dataclass
class FindingParametersReport:
    """Whether Q at slope bound 4/epsilon covers half of I when thresholds are spread"""
    epsilon: float
    hypothesis: bool
    q_measure: float
    i_measure: float
    slack: float

    @property
    def holds(self) -> bool:
        if not self.hypothesis:
            return True
        return self.q_measure >= 0.5 * self.i_measure - self.slack

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon, "hypothesis": self.hypothesis,
            "q_measure": self.q_measure, "i_measure": self.i_measure,
            "slack": self.slack, "holds": self.holds,
        }


@dataclass
class SprinklingSequence:
    """Increasing parameters p_0 < p_1 < ... in Q with controlled f-increments"""
    q_set_measure: float
    p_seq: np.ndarray
    f_at_p: np.ndarray
    slack: float

    def rows(self) -> List[Dict[str, float]]:
        return [{"n": i, "p": float(p), "f": float(f)} for i, (p, f) in enumerate(zip(self.p_seq, self.f_at_p))]


@dataclass
class CoupledPair:
    """Monotone coupling omega_q <= omega_p"""
    q: float
    p: float
    omega_q: Configuration
    omega_p: Configuration


@dataclass
class Subgraph:
    """Vertex set plus an explicit set of edge indices of the host graph"""
    vertices: np.ndarray
    edges: np.ndarray


@dataclass
class SandcastleReport:
    """Conditional shattering score of a connected subgraph"""
    density: float
    score: ProportionEstimate
    is_sandcastle: bool
    n_vertices: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "density": self.density, "score": self.score.to_dict(),
            "is_sandcastle": self.is_sandcastle, "n_vertices": self.n_vertices,
        }


@dataclass
class SandcastleFrequency:
    """Per-probe sandcastle frequencies and the existence bound"""
    probes: List[int]
    frequencies: List[ProportionEstimate]
    p_k2_beta: ProportionEstimate
    q_k2_alpha: ProportionEstimate
    beta: float
    rows: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def supremum(self) -> ProportionEstimate:
        return max(self.frequencies, key=lambda est: est.estimate)

    @property
    def rhs(self) -> float:
        return self.beta * (self.p_k2_beta.estimate - 4 * self.q_k2_alpha.estimate)

    @property
    def sigma(self) -> float:
        return float(np.sqrt(
            self.supremum.std_error ** 2
            + self.beta ** 2 * (self.p_k2_beta.std_error ** 2 + 16 * self.q_k2_alpha.std_error ** 2)
        ))

    def holds_within(self, n_sigma: float = 3.0) -> bool:
        return self.supremum.estimate >= self.rhs - n_sigma * self.sigma

    def to_dict(self) -> Dict[str, Any]:
        return {
            "probes": self.probes,
            "frequencies": [est.to_dict() for est in self.frequencies],
            "p_k2_beta": self.p_k2_beta.to_dict(),
            "q_k2_alpha": self.q_k2_alpha.to_dict(),
            "rhs": self.rhs, "sigma": self.sigma, "holds": self.holds_within(),
        }


@dataclass
class BoundCheck:
    """A measured probability against a bound, with combined standard error"""
    estimate: ProportionEstimate
    bound: float
    sigma: float
    lower_bound: bool = False

    def holds_within(self, n_sigma: float = 3.0) -> bool:
        if self.lower_bound:
            return self.estimate.estimate >= self.bound - n_sigma * self.sigma
        return self.estimate.estimate <= self.bound + n_sigma * self.sigma

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate.to_dict(), "bound": self.bound,
            "sigma": self.sigma, "holds": self.holds_within(),
        }


@dataclass
class SeparatorResult:
    """Balanced bipartition witness"""
    theta: float
    cut_size: int
    side_a: np.ndarray
    exact: bool
    degree_weighted_share: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.theta, "cut_size": self.cut_size,
            "side_a": sorted(int(v) for v in self.side_a),
            "exact": self.exact, "degree_weighted_share": self.degree_weighted_share,
        }


@dataclass
class MolecularReport:
    """Orbit-union edge set whose removal splits the graph into m components"""
    m: int
    removed_orbits: Tuple[int, ...]
    f_size: int
    c_ratio: float
    components_equal_size: bool
    component_sizes: Tuple[int, ...]
    edge_density: float
    dense: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m, "removed_orbits": list(self.removed_orbits),
            "f_size": self.f_size, "c_ratio": self.c_ratio,
            "components_equal_size": self.components_equal_size,
            "component_sizes": list(self.component_sizes),
            "edge_density": self.edge_density, "dense": self.dense,
        }


@dataclass
class DensityReport:
    edge_density: float
    degree_ratio: float

    def to_dict(self) -> Dict[str, float]:
        return {"edge_density": self.edge_density, "degree_ratio": self.degree_ratio}


def as_index_array(values: Sequence[int], n: int, name: str = "vertex set") -> np.ndarray:
    """Validate and normalise a collection of indices in [0, n)"""
    arr = np.unique(np.asarray(list(values), dtype=np.int64))
    if arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise ContractViolationError(f"{name} has indices outside [0, {n})")
    return arr
