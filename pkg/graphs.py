"""
Graph families with edge indices, CSR adjacency and declared edge orbits

Vertex indexing is row-major for every product structure (first coordinate
most significant); edge indices follow construction order, documented per
constructor, so that all downstream seeds reproduce bit-exactly.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csgraph

from errors import (
    ContractViolationError, InfiniteDiameterError, InvalidParameterError, SizeLimitError,
)
from models import Graph, Subgraph, as_index_array
from utils import derive_seed, stream_generator

logger = logging.getLogger(__name__)

MAX_VERTICES = 1 << 24
MAX_EDGES = 1 << 26
DIAMETER_EXACT_LIMIT = 4096
DIAMETER_SAMPLE_SOURCES = 64


def build_graph(n_vertices: int,
                pairs: np.ndarray,
                edge_orbits: Optional[Sequence[Sequence[int]]] = None,
                transitive: bool = False,
                family: str = "custom",
                params: Optional[Dict[str, Any]] = None,
                require_connected: bool = True) -> Graph:
    """
    Assemble an immutable Graph from an edge list

    Args:
        n_vertices: Vertex count
        pairs: (|E|, 2) integer array; row order defines edge indices
        edge_orbits: Optional partition of edge indices
        transitive: Vertex-transitive by construction
        family: Family name
        params: Family parameters
        require_connected: Reject disconnected input

    Returns:
        Graph

    Raises:
        InvalidParameterError: On loops, repeated pairs, bad orbits or disconnection
        SizeLimitError: Above MAX_VERTICES / MAX_EDGES
    """
    if n_vertices < 1:
        raise InvalidParameterError("graph needs at least one vertex")
    if n_vertices > MAX_VERTICES:
        raise SizeLimitError(f"{n_vertices} vertices exceeds the limit {MAX_VERTICES}")

    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] > MAX_EDGES:
        raise SizeLimitError(f"{pairs.shape[0]} edges exceeds the limit {MAX_EDGES}")
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n_vertices):
        raise InvalidParameterError("edge endpoint outside the vertex range")

    edges = np.sort(pairs, axis=1)
    if np.any(edges[:, 0] == edges[:, 1]):
        raise InvalidParameterError("loops are not allowed in a simple graph")
    keys = edges[:, 0] * n_vertices + edges[:, 1]
    if np.unique(keys).shape[0] != keys.shape[0]:
        raise InvalidParameterError("repeated edge: graph would not be simple")

    m = edges.shape[0]
    sources = np.concatenate([edges[:, 0], edges[:, 1]])
    targets = np.concatenate([edges[:, 1], edges[:, 0]])
    edge_ids = np.concatenate([np.arange(m), np.arange(m)])
    order = np.argsort(sources, kind="stable")
    degrees = np.bincount(sources, minlength=n_vertices).astype(np.int64)
    offsets = np.zeros(n_vertices + 1, dtype=np.int64)
    np.cumsum(degrees, out=offsets[1:])

    orbits = None
    if edge_orbits is not None:
        orbits = tuple(np.asarray(orbit, dtype=np.int64) for orbit in edge_orbits)
        flat = np.concatenate(orbits) if orbits else np.empty(0, dtype=np.int64)
        if flat.shape[0] != m or not np.array_equal(np.sort(flat), np.arange(m)):
            raise InvalidParameterError("edge orbits must partition the edge indices")

    if transitive and degrees.size and np.any(degrees != degrees[0]):
        raise InvalidParameterError("transitive flag set on a graph with unequal degrees")

    for array in (edges, offsets, degrees):
        array.setflags(write=False)

    graph = Graph(
        n_vertices=int(n_vertices),
        edges=edges,
        offsets=offsets,
        neighbors=targets[order],
        incident=edge_ids[order],
        degrees=degrees,
        edge_orbits=orbits,
        transitive=bool(transitive),
        family=family,
        params=dict(params or {}),
    )

    if require_connected and not is_connected(graph):
        raise InvalidParameterError(f"{graph.family_tag} is not connected")

    logger.debug(f"Built {graph.family_tag}: {n_vertices} vertices, {m} edges")
    return graph


def is_connected(graph: Graph) -> bool:
    n_components, _ = csgraph.connected_components(graph.adjacency_matrix, directed=False)
    return n_components == 1


def _grid_index(dims: Sequence[int]) -> np.ndarray:
    """Coordinates of every vertex in row-major order, shape (|V|, len(dims))"""
    return np.indices(dims).reshape(len(dims), -1).T


def _row_major(coords: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    return np.ravel_multi_index(tuple(coords.T), tuple(dims))


# ----------------------------------------------------------------------------
# Families
# ----------------------------------------------------------------------------

def cycle(n: int) -> Graph:
    """Cycle Z/nZ; edge i joins i and i+1 mod n"""
    if n < 3:
        raise InvalidParameterError(f"cycle needs n >= 3, got {n}")
    idx = np.arange(n)
    pairs = np.stack([idx, (idx + 1) % n], axis=1)
    return build_graph(n, pairs, [np.arange(n)], transitive=True,
                       family="cycle", params={"n": n})


def torus(dims: Sequence[int]) -> Graph:
    """
    Product of cycles Z/d_1 x ... x Z/d_k

    Edges are listed axis by axis, and within an axis by vertex index, joining
    x to x + e_axis. An axis of length 2 contributes a single edge per pair.
    """
    dims = [int(d) for d in dims]
    if not dims:
        raise InvalidParameterError("torus needs at least one dimension")
    if any(d < 2 for d in dims):
        raise InvalidParameterError(f"torus dimensions must be >= 2, got {dims}")
    n = math.prod(dims)
    if n > MAX_VERTICES:
        raise SizeLimitError(f"torus with {n} vertices exceeds the limit")

    coords = _grid_index(dims)
    pairs: List[np.ndarray] = []
    orbits: List[np.ndarray] = []
    offset = 0
    for axis, length in enumerate(dims):
        sources = np.arange(n)
        if length == 2:
            sources = sources[coords[:, axis] == 0]
        shifted = coords[sources].copy()
        shifted[:, axis] = (shifted[:, axis] + 1) % length
        pairs.append(np.stack([sources, _row_major(shifted, dims)], axis=1))
        orbits.append(np.arange(offset, offset + sources.shape[0]))
        offset += sources.shape[0]

    return build_graph(n, np.concatenate(pairs), orbits, transitive=True,
                       family="torus", params={"dims": dims})


def hypercube(d: int) -> Graph:
    """Hypercube {0,1}^d; edges grouped by flipped coordinate"""
    if d < 1:
        raise InvalidParameterError(f"hypercube needs d >= 1, got {d}")
    if d > 24:
        raise SizeLimitError(f"hypercube dimension {d} exceeds 24")
    n = 1 << d
    vertices = np.arange(n)
    pairs = []
    for bit in range(d):
        low = vertices[(vertices >> bit) & 1 == 0]
        pairs.append(np.stack([low, low | (1 << bit)], axis=1))
    m = d * (n >> 1)
    return build_graph(n, np.concatenate(pairs), [np.arange(m)], transitive=True,
                       family="hypercube", params={"d": d})


def complete(n: int) -> Graph:
    """Complete graph K_n; edges in lexicographic (u, v) order"""
    if n < 2:
        raise InvalidParameterError(f"complete graph needs n >= 2, got {n}")
    if n * (n - 1) // 2 > MAX_EDGES:
        raise SizeLimitError(f"K_{n} has too many edges")
    u, v = np.triu_indices(n, k=1)
    pairs = np.stack([u, v], axis=1)
    return build_graph(n, pairs, [np.arange(pairs.shape[0])], transitive=True,
                       family="complete", params={"n": n})


def cartesian_product(g: Graph, h: Graph) -> Graph:
    """
    Cartesian product G x H with vertex (a, b) -> a * |H| + b

    G-edges come first (G edge index major, H vertex minor), then H-edges
    (G vertex major, H edge index minor). Orbits are lifted from both factors
    when both carry them.
    """
    nh = h.n_vertices
    n = g.n_vertices * nh
    if n > MAX_VERTICES:
        raise SizeLimitError(f"product with {n} vertices exceeds the limit")

    h_vertices = np.arange(nh)
    g_part = np.stack([
        (g.edges[:, 0, None] * nh + h_vertices[None, :]).ravel(),
        (g.edges[:, 1, None] * nh + h_vertices[None, :]).ravel(),
    ], axis=1)
    g_vertices = np.arange(g.n_vertices)
    h_part = np.stack([
        (g_vertices[:, None] * nh + h.edges[None, :, 0]).ravel(),
        (g_vertices[:, None] * nh + h.edges[None, :, 1]).ravel(),
    ], axis=1)

    orbits = None
    if g.edge_orbits is not None and h.edge_orbits is not None:
        orbits = []
        for orbit in g.edge_orbits:
            orbits.append((orbit[:, None] * nh + h_vertices[None, :]).ravel())
        base = g.m_edges * nh
        for orbit in h.edge_orbits:
            orbits.append(base + (g_vertices[:, None] * h.m_edges + orbit[None, :]).ravel())
        orbits = [np.sort(orbit) for orbit in orbits]

    return build_graph(
        n, np.concatenate([g_part, h_part]), orbits,
        transitive=g.transitive and h.transitive,
        family="product",
        params={"left": _spec_of(g), "right": _spec_of(h)},
    )


def abelian_cayley(moduli: Sequence[int], generators: Sequence[Sequence[int]]) -> Graph:
    """
    Cayley graph of Z/m_1 x ... x Z/m_k with generators +-g

    Edges are grouped by generator in the order given, each group listing
    x -- x + g by vertex index; an involutive generator contributes each pair once.
    """
    moduli = [int(m) for m in moduli]
    if not moduli or any(m < 2 for m in moduli):
        raise InvalidParameterError(f"moduli must be >= 2, got {moduli}")
    if not generators:
        raise InvalidParameterError("at least one generator is required")
    n = math.prod(moduli)
    if n > MAX_VERTICES:
        raise SizeLimitError(f"Cayley graph with {n} vertices exceeds the limit")

    coords = _grid_index(moduli)
    mod = np.asarray(moduli)
    pairs: List[np.ndarray] = []
    orbits: List[np.ndarray] = []
    offset = 0
    seen: List[np.ndarray] = []
    for gen in generators:
        g = np.asarray(gen, dtype=np.int64)
        if g.shape != (len(moduli),):
            raise InvalidParameterError(f"generator {list(gen)} has the wrong length")
        g = g % mod
        if not g.any():
            raise InvalidParameterError(f"generator {list(gen)} is zero modulo {moduli}")
        if any(np.array_equal(g, h) or np.array_equal(g, (-h) % mod) for h in seen):
            raise InvalidParameterError(f"generator {list(gen)} coincides with an earlier one up to sign")
        seen.append(g)
        targets = _row_major((coords + g) % mod, moduli)
        block = np.sort(np.stack([np.arange(n), targets], axis=1), axis=1)
        if not ((2 * g) % mod).any():
            # involution: x -> x+g and x+g -> x give the same pair
            _, first = np.unique(block[:, 0] * n + block[:, 1], return_index=True)
            block = block[np.sort(first)]
        pairs.append(block)
        orbits.append(np.arange(offset, offset + block.shape[0]))
        offset += block.shape[0]

    return build_graph(n, np.concatenate(pairs), orbits, transitive=True,
                       family="cayley",
                       params={"moduli": moduli, "generators": [list(map(int, g)) for g in generators]})


def molecular_chain(n: int, alpha: float) -> Graph:
    """
    Chain K_2n - K_n - K_n - K_2n of complete blocks

    Between adjacent blocks X, Y (X the larger, or the left one on a tie),
    vertex i of X is joined to Y vertices (i + j) mod |Y| for
    j < ceil(n^alpha). Edges: intra-block blocks first (lexicographic),
    then the three inter-block windows from left to right.
    """
    if n < 4:
        raise InvalidParameterError(f"molecular chain needs n >= 4, got {n}")
    if not 0 < alpha < 0.5:
        raise InvalidParameterError(f"alpha must lie in (0, 1/2), got {alpha}")
    window = math.ceil(n ** alpha)
    sizes = [2 * n, n, n, 2 * n]
    starts = np.cumsum([0] + sizes[:-1])
    if window >= min(sizes):
        raise InvalidParameterError(f"window {window} must be smaller than every block")

    pairs = []
    for start, size in zip(starts, sizes):
        u, v = np.triu_indices(size, k=1)
        pairs.append(np.stack([u + start, v + start], axis=1))
    for left in range(3):
        a, b = left, left + 1
        if sizes[b] > sizes[a]:
            a, b = b, a
        src = np.repeat(np.arange(sizes[a]), window)
        dst = (src + np.tile(np.arange(window), sizes[a])) % sizes[b]
        pairs.append(np.stack([src + starts[a], dst + starts[b]], axis=1))

    return build_graph(sum(sizes), np.concatenate(pairs),
                       transitive=False, family="molecular-chain",
                       params={"n": n, "alpha": alpha})


def path_pair() -> Graph:
    """
    10-vertex gadget: paths 0-1-2-3 and 4-5-6-7 joined by the bridge 3-4,
    with pendants 8 (on 0) and 9 (on 7). The bridge has edge index 3.
    """
    pairs = np.array([
        [0, 1], [1, 2], [2, 3],
        [3, 4],
        [4, 5], [5, 6], [6, 7],
        [0, 8], [7, 9],
    ])
    return build_graph(10, pairs, family="path-pair")


PATH_PAIR_BRIDGE = 3


def kn_box_k2(n: int) -> Graph:
    """K_n x K_2; the last n edge indices are the bridges"""
    return cartesian_product(complete(n), complete(2))


# ----------------------------------------------------------------------------
# Specs and serialisation
# ----------------------------------------------------------------------------

def _spec_of(graph: Graph) -> Dict[str, Any]:
    return {"family": graph.family, **graph.params}


def graph_from_spec(spec: Dict[str, Any]) -> Graph:
    """
    Build a graph from a family description

    Examples:
        {"family": "torus", "dims": [4, 4]}
        {"family": "product", "left": {...}, "right": {...}}
        {"family": "json", "graph": {...}}

    Raises:
        InvalidParameterError: On unknown families or missing parameters
    """
    spec = dict(spec)
    family = spec.pop("family", None)
    try:
        if family == "cycle":
            return cycle(int(spec["n"]))
        if family == "torus":
            return torus(spec["dims"])
        if family == "hypercube":
            return hypercube(int(spec["d"]))
        if family == "complete":
            return complete(int(spec["n"]))
        if family == "product":
            return cartesian_product(graph_from_spec(spec["left"]), graph_from_spec(spec["right"]))
        if family == "kn-box-k2":
            return kn_box_k2(int(spec["n"]))
        if family == "cayley":
            return abelian_cayley(spec["moduli"], spec["generators"])
        if family == "molecular-chain":
            return molecular_chain(int(spec["n"]), float(spec["alpha"]))
        if family == "path-pair":
            return path_pair()
        if family == "json":
            return graph_from_dict(spec["graph"])
    except KeyError as e:
        raise InvalidParameterError(f"family {family!r} needs parameter {e.args[0]!r}")
    raise InvalidParameterError(f"unknown graph family {family!r}")


def graph_from_dict(data: Dict[str, Any]) -> Graph:
    """Inverse of Graph.to_dict"""
    try:
        return build_graph(
            int(data["n_vertices"]),
            np.asarray(data["edges"], dtype=np.int64).reshape(-1, 2),
            data.get("edge_orbits"),
            transitive=bool(data.get("transitive", False)),
            family=data.get("family", "custom"),
            params=data.get("params") or {},
            require_connected=False,
        )
    except KeyError as e:
        raise InvalidParameterError(f"graph description is missing {e.args[0]!r}")


# ----------------------------------------------------------------------------
# Metrics and invariants
# ----------------------------------------------------------------------------

def _eccentricities(graph: Graph, sources: np.ndarray, chunk: int = 256) -> np.ndarray:
    ecc = np.empty(sources.shape[0], dtype=np.int64)
    for start in range(0, sources.shape[0], chunk):
        block = sources[start:start + chunk]
        dist = csgraph.shortest_path(graph.adjacency_matrix, method="D",
                                     unweighted=True, directed=False, indices=block)
        dist = np.atleast_2d(dist)
        if np.isinf(dist).any():
            raise InfiniteDiameterError(f"{graph.family_tag} is disconnected")
        ecc[start:start + block.shape[0]] = dist.max(axis=1).astype(np.int64)
    return ecc


def diameter_bracket(graph: Graph, exact_limit: int = DIAMETER_EXACT_LIMIT,
                     sample_sources: int = DIAMETER_SAMPLE_SOURCES,
                     seed: int = 0) -> Tuple[int, int]:
    """
    Lower and upper bounds on the diameter (equal when computed exactly)

    Above exact_limit vertices, eccentricities of sampled sources give
    max(ecc) <= diam <= 2 min(ecc).
    """
    if graph.n_vertices == 1:
        return 0, 0
    if graph.n_vertices <= exact_limit:
        value = int(_eccentricities(graph, np.arange(graph.n_vertices)).max())
        return value, value
    rng = stream_generator(derive_seed(seed, "diameter"), 0)
    sources = rng.choice(graph.n_vertices, size=min(sample_sources, graph.n_vertices), replace=False)
    ecc = _eccentricities(graph, np.sort(sources))
    return int(ecc.max()), int(min(2 * ecc.min(), graph.n_vertices - 1))


def diameter(graph: Graph, exact_limit: int = DIAMETER_EXACT_LIMIT) -> int:
    """
    Graph diameter by all-sources BFS

    Above exact_limit vertices the sampled upper bound is returned and the
    bracket is logged.

    Raises:
        InfiniteDiameterError: If the graph is disconnected
    """
    lower, upper = diameter_bracket(graph, exact_limit=exact_limit)
    if lower != upper:
        logger.warning(f"diameter of {graph.family_tag} sampled: in [{lower}, {upper}]")
    return upper


def degree_diameter_bound(graph: Graph) -> float:
    """(3 - a)/a with a = min degree / |V|"""
    a = graph.degrees.min() / graph.n_vertices
    if a <= 0:
        return math.inf
    return (3 - a) / a


def check_invariants(graph: Graph) -> List[str]:
    """
    Check simplicity, connectivity, degree, orbit and adjacency invariants

    Returns:
        List of violated invariant descriptions (empty when all hold)
    """
    problems = []
    edges = graph.edges
    keys = np.sort(edges[:, 0] * graph.n_vertices + edges[:, 1])
    if np.any(edges[:, 0] >= edges[:, 1]) or np.any(np.diff(keys) == 0):
        problems.append("not simple")
    if not is_connected(graph):
        problems.append("not connected")
    if graph.transitive and np.any(graph.degrees != graph.degrees[0]):
        problems.append("transitive with unequal degrees")
    if graph.edge_orbits is not None:
        flat = np.sort(np.concatenate(graph.edge_orbits))
        if not np.array_equal(flat, np.arange(graph.m_edges)):
            problems.append("edge orbits are not a partition")

    sources = np.repeat(np.arange(graph.n_vertices), np.diff(graph.offsets))
    ends = edges[graph.incident]
    matches = ((ends[:, 0] == sources) & (ends[:, 1] == graph.neighbors)) | \
              ((ends[:, 1] == sources) & (ends[:, 0] == graph.neighbors))
    if not matches.all() or np.any(np.bincount(graph.incident, minlength=graph.m_edges) != 2):
        problems.append("adjacency inconsistent with edge list")
    return problems


def induced_subgraph(graph: Graph, vertices: Sequence[int],
                     open_mask: Optional[np.ndarray] = None) -> Subgraph:
    """Vertex set with the edges of G (optionally only open ones) inside it"""
    verts = as_index_array(vertices, graph.n_vertices)
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[verts] = True
    keep = inside[graph.edges[:, 0]] & inside[graph.edges[:, 1]]
    if open_mask is not None:
        keep &= open_mask
    return Subgraph(vertices=verts, edges=np.flatnonzero(keep))


def incident_edge_set(graph: Graph, vertices: Sequence[int]) -> np.ndarray:
    """Indices of edges with at least one endpoint in the vertex set"""
    verts = as_index_array(vertices, graph.n_vertices)
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[verts] = True
    return np.flatnonzero(inside[graph.edges[:, 0]] | inside[graph.edges[:, 1]])


def coordinate_permutation(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Vertex map of a torus induced by permuting coordinates (equal dims only)"""
    dims = list(dims)
    if sorted(perm) != list(range(len(dims))) or any(dims[i] != dims[j] for i, j in enumerate(perm)):
        raise ContractViolationError("coordinate permutation must preserve the dimensions")
    coords = _grid_index(dims)
    return _row_major(coords[:, list(perm)], dims)
