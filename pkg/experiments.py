"""
Named reproduction experiments

Each experiment declares a parameter schema and a run function producing
JSONL rows plus a summary. ``run_experiment`` validates the configuration
against the schema before any sampling, writes the rows and a JSON sidecar
with provenance (version, config echo, seed, wall-clock, graph digests).
"""

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

import estimators
import graphs
import percolation
import runner
from config import ExperimentConfig, LabConfig, __version__
from errors import ConfigError
from models import Graph
from utils import derive_seed, dumps, mean_confidence, size_threshold, wilson_interval, write_jsonl

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """Rows, aggregate statistics and the graphs the run touched"""
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any]
    graphs: Dict[str, str]
    inconclusive: bool = False


@dataclass
class Experiment:
    name: str
    description: str
    schema: Dict[str, Tuple[type, Any, Optional[Callable[[Any], bool]]]]
    replicas: int
    run: Callable[[Dict[str, Any], int, int, LabConfig], ExperimentResult]
    slow: bool = False


def _positive(value) -> bool:
    return value > 0


def _unit(value) -> bool:
    return 0 < value < 1


def _sizes(value) -> bool:
    return len(value) > 0 and all(isinstance(v, int) and v >= 3 for v in value)


def _interval(values: Sequence[float], confidence: float) -> Dict[str, float]:
    mean, lo, hi = mean_confidence(values, confidence)
    return {"estimate": mean, "ci_lo": lo, "ci_hi": hi}


def _proportion(successes: float, trials: int, confidence: float) -> Dict[str, float]:
    estimate, lo, hi = wilson_interval(successes, trials, confidence)
    return {"successes": successes, "trials": trials, "estimate": estimate, "ci_lo": lo, "ci_hi": hi}


def _replica_rows(graph: Graph, p: float, replicas: int, seed: int, threads: int,
                  flags=None) -> List[Dict[str, Any]]:
    n = graph.n_vertices
    rows = []
    for row in percolation.simulate(graph, p, replicas, seed, flags=flags, threads=threads):
        data = row.to_dict()
        data["k1_density"] = row.k1 / n
        data["k2_density"] = row.k2 / n
        rows.append(data)
    return rows


def _scan_graph(family: str, n: int) -> Graph:
    if family == "complete":
        return graphs.complete(n)
    return graphs.kn_box_k2(n)


# ----------------------------------------------------------------------------
# Experiments
# ----------------------------------------------------------------------------

def run_kn_giant(params: Dict[str, Any], replicas: int, seed: int, lab: LabConfig) -> ExperimentResult:
    """Second-largest cluster on K_n at p = c/n: E||K2|| small, |K2| of order log n"""
    n, c = params["n"], params["c"]
    graph = graphs.complete(n)
    bound = params["bound_factor"] * math.log(n)
    rows = _replica_rows(graph, c / n, replicas, seed, lab.threads)
    for row in rows:
        row["k2_within_log_bound"] = row["k2"] <= bound
    within = sum(row["k2_within_log_bound"] for row in rows)
    summary = {
        "p": c / n,
        "k1_density": _interval([r["k1_density"] for r in rows], lab.confidence),
        "k2_density": _interval([r["k2_density"] for r in rows], lab.confidence),
        "k2_size": _interval([r["k2"] for r in rows], lab.confidence),
        "log_bound": bound,
        "k2_within_log_bound": _proportion(within, replicas, lab.confidence),
    }
    return ExperimentResult(rows, summary, {graph.family_tag: graph.digest})


def run_kn_box_k2(params: Dict[str, Any], replicas: int, seed: int, lab: LabConfig) -> ExperimentResult:
    """Two copies of K_n joined by a perfect matching at p = c/n"""
    n, c, beta = params["n"], params["c"], params["beta"]
    graph = graphs.kn_box_k2(n)
    p = c / n
    bridges = np.arange(graph.m_edges - n, graph.m_edges)
    target = size_threshold(beta, graph.n_vertices)
    flags = {
        "bridge_empty": lambda omega, _dec: not omega.open[bridges].any(),
        "k2_at_least_beta": lambda _omega, dec: dec.k2 >= target,
    }
    rows = _replica_rows(graph, p, replicas, seed, lab.threads, flags)
    empty = sum(row["bridge_empty"] for row in rows)
    two = sum(row["k2_at_least_beta"] for row in rows)
    summary = {
        "p": p,
        "bridge_empty": _proportion(empty, replicas, lab.confidence),
        "bridge_empty_exact": (1 - p) ** n,
        "bridge_empty_poisson": math.exp(-c),
        "k2_at_least_beta": _proportion(two, replicas, lab.confidence),
        "k2_density": _interval([r["k2_density"] for r in rows], lab.confidence),
    }
    return ExperimentResult(rows, summary, {graph.family_tag: graph.digest})


def run_torus2d_k2(params: Dict[str, Any], replicas: int, seed: int, lab: LabConfig) -> ExperimentResult:
    """|K2| on (Z/nZ)^2 above threshold against (log |V|)^2"""
    p = params["p"]
    rows, digests = [], {}
    for n in params["sizes"]:
        graph = graphs.torus([n, n])
        digests[graph.family_tag] = graph.digest
        sims = percolation.simulate(graph, p, replicas, derive_seed(seed, "torus2d", n), threads=lab.threads)
        k2 = [row.k2 for row in sims]
        scale = math.log(graph.n_vertices) ** 2
        mean, lo, hi = mean_confidence(k2, lab.confidence)
        rows.append({
            "n": n, "n_vertices": graph.n_vertices, "p": p, "replicas": replicas,
            "k2_mean": mean, "k2_ci_lo": lo, "k2_ci_hi": hi,
            "k2_density_mean": mean / graph.n_vertices,
            "log_scale": scale, "k2_over_log_scale": mean / scale,
        })
    summary = {"p": p, "k2_over_log_scale": [row["k2_over_log_scale"] for row in rows]}
    return ExperimentResult(rows, summary, digests)


def run_elongated_torus(params: Dict[str, Any], replicas: int, seed: int, lab: LabConfig) -> ExperimentResult:
    """Giant multiplicity on Z/aZ x Z/bZ with b much longer than a"""
    a, b, p, beta = params["a"], params["b"], params["p"], params["beta"]
    graph = graphs.torus([a, b])
    target = size_threshold(beta, graph.n_vertices)
    flags = {"k2_at_least_beta": lambda _omega, dec: dec.k2 >= target}
    rows = _replica_rows(graph, p, replicas, seed, lab.threads, flags)
    two = sum(row["k2_at_least_beta"] for row in rows)
    summary = {
        "p": p,
        "k1_density": _interval([r["k1_density"] for r in rows], lab.confidence),
        "k2_density": _interval([r["k2_density"] for r in rows], lab.confidence),
        "k2_at_least_beta": _proportion(two, replicas, lab.confidence),
    }
    return ExperimentResult(rows, summary, {graph.family_tag: graph.digest})


def run_molecular_chain(params: Dict[str, Any], replicas: int, seed: int, lab: LabConfig) -> ExperimentResult:
    """Two giants in the end blocks of K_2n - K_n - K_n - K_2n at p = c/n"""
    n, c, beta = params["n"], params["c"], params["beta"]
    graph = graphs.molecular_chain(n, params["exponent"])
    p = c / n
    starts = np.cumsum([0, 2 * n, n, n])
    target = size_threshold(beta, graph.n_vertices)

    def block_of(v: int) -> int:
        return int(np.searchsorted(starts, v, side="right")) - 1

    def task(r: int) -> Dict[str, Any]:
        dec = percolation.clusters(graph, percolation.sample(graph, p, seed, r))
        k1_block = block_of(int(dec.members(0)[0]))
        k2_block = block_of(int(dec.members(1)[0])) if dec.n_clusters > 1 else -1
        return {
            "replica": r, "p": p, "k1": dec.k1, "k2": dec.k2,
            "k1_density": dec.k1 / graph.n_vertices, "k2_density": dec.k2 / graph.n_vertices,
            "k1_block": k1_block, "k2_block": k2_block,
            "two_giants": dec.k2 >= target and {k1_block, k2_block} == {0, 3},
        }

    rows = runner.run_replicas(task, replicas, threads=lab.threads)
    two = sum(row["two_giants"] for row in rows)
    summary = {
        "p": p,
        "two_giants": _proportion(two, replicas, lab.confidence),
        "k2_density": _interval([r["k2_density"] for r in rows], lab.confidence),
    }
    return ExperimentResult(rows, summary, {graph.family_tag: graph.digest})


def run_sharpness_scan(params: Dict[str, Any], replicas: int, seed: int, lab: LabConfig) -> ExperimentResult:
    """p_c(beta, 1-delta) / p_c(beta, delta) across n"""
    rows, digests, ratios = [], {}, []
    for n in params["sizes"]:
        graph = _scan_graph(params["family"], n)
        digests[graph.family_tag] = graph.digest
        ratio = estimators.sharp_density_ratio(
            graph, params["beta"], params["delta"], tolerance=params["tolerance"],
            seed=derive_seed(seed, "sharpness", n), budget=replicas,
            batch=min(lab.threshold_batch, replicas), confidence=lab.confidence,
            threads=lab.threads,
        )
        ratios.append(ratio)
        rows.append({"n": n, "family": params["family"], **ratio.to_dict()})

    values = [r.ratio for r in ratios]
    summary = {
        "ratios": values,
        "monotone_decreasing": all(a > b for a, b in zip(values, values[1:])),
        "extreme_brackets_disjoint": ratios[-1].ratio_hi < ratios[0].ratio_lo,
        "max_ratio": max(values),
    }
    return ExperimentResult(rows, summary, digests, inconclusive=any(r.inconclusive for r in ratios))


def run_existence_scan(params: Dict[str, Any], replicas: int, seed: int, lab: LabConfig) -> ExperimentResult:
    """P(||K1|| >= alpha) along p = c/n, with an epsilon-supercriticality verdict"""
    rows, digests, inconclusive = [], {}, False
    for n in params["sizes"]:
        graph = _scan_graph(params["family"], n)
        digests[graph.family_tag] = graph.digest
        p = params["c"] / n
        pool = estimators.CrossingPool(graph, params["alpha"], derive_seed(seed, "existence", n), lab.threads)
        pool.extend(replicas)
        verdict = estimators.epsilon_supercritical(
            graph, p, params["epsilon"], seed=derive_seed(seed, "existence-verdict", n),
            confidence=lab.confidence, budget=lab.threshold_budget,
            batch=lab.threshold_batch, threads=lab.threads,
        )
        inconclusive = inconclusive or verdict.inconclusive
        rows.append({
            "n": n, "family": params["family"], "p": p, "alpha": params["alpha"],
            "existence": pool.estimate(p, lab.confidence).to_dict(),
            "verdict": verdict.to_dict(),
        })
    summary = {"existence": [row["existence"]["estimate"] for row in rows]}
    return ExperimentResult(rows, summary, digests, inconclusive=inconclusive)


_FAMILY = (str, "complete", lambda v: v in ("complete", "kn-box-k2"))

EXPERIMENTS: Dict[str, Experiment] = {
    e.name: e for e in [
        Experiment("kn-giant", "K_n uniqueness and second-cluster size", {
            "n": (int, 2000, lambda v: v >= 3),
            "c": (float, 2.0, _positive),
            "bound_factor": (float, 10.0, _positive),
        }, 1000, run_kn_giant),
        Experiment("kn-box-k2", "Non-uniqueness on K_n x K_2", {
            "n": (int, 500, lambda v: v >= 3),
            "c": (float, 2.0, _positive),
            "beta": (float, 0.3, _unit),
        }, 10000, run_kn_box_k2),
        Experiment("torus2d-k2", "|K2| scaling on two-dimensional tori", {
            "sizes": (list, [16, 32, 64], _sizes),
            "p": (float, 0.6, _unit),
        }, 200, run_torus2d_k2),
        Experiment("elongated-torus", "Giant multiplicity on long thin tori", {
            "a": (int, 6, lambda v: v >= 3),
            "b": (int, 64, lambda v: v >= 3),
            "p": (float, 0.6, _unit),
            "beta": (float, 0.1, _unit),
        }, 500, run_elongated_torus, slow=True),
        Experiment("molecular-chain", "Two giants on a chain of complete blocks", {
            "n": (int, 200, lambda v: v >= 4),
            "exponent": (float, 0.25, lambda v: 0 < v < 0.5),
            "c": (float, 0.75, _positive),
            "beta": (float, 0.1, _unit),
        }, 500, run_molecular_chain),
        Experiment("sharpness-scan", "Sharp density ratio across n", {
            "sizes": (list, [100, 400, 1600], _sizes),
            "family": _FAMILY,
            "beta": (float, 0.5, lambda v: 0 < v <= 1),
            "delta": (float, 0.1, lambda v: 0 < v <= 0.5),
            "tolerance": (float, 0.005, _unit),
        }, 20000, run_sharpness_scan),
        Experiment("existence-scan", "Giant existence along supercritical sequences", {
            "sizes": (list, [100, 400, 1600], _sizes),
            "family": _FAMILY,
            "c": (float, 2.0, _positive),
            "alpha": (float, 0.5, lambda v: 0 < v <= 1),
            "epsilon": (float, 0.2, _unit),
        }, 2000, run_existence_scan),
    ]
}


def get_experiment(name: str) -> Experiment:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(f"Unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")


def summary_path(output: str) -> Path:
    path = Path(output)
    return path.with_name(path.stem + ".summary.json")


def run_experiment(config: ExperimentConfig, lab: LabConfig,
                   stream: Optional[TextIO] = None) -> ExperimentResult:
    """
    Validate, run and persist a named experiment

    Rows go to config.output (or the given stream); the summary sidecar is
    written next to config.output when it is set.

    Raises:
        ConfigError: If the configuration does not fit the experiment schema
    """
    experiment = get_experiment(config.name)
    if config.graph:
        raise ConfigError(f"Experiment {config.name!r} builds its own graphs; drop the graph section")
    config.validate(experiment.schema)
    params = config.resolved_params(experiment.schema)
    replicas = config.replicas or experiment.replicas
    if experiment.slow:
        logger.warning(f"Experiment {config.name} is slow at default sizes")

    logger.info(f"Running {config.name} (seed={config.seed}, replicas={replicas})")
    started = time.perf_counter()
    result = experiment.run(params, replicas, config.seed, lab)
    elapsed = time.perf_counter() - started

    sidecar = {
        "version": __version__,
        "experiment": config.name,
        "config": {**config.to_dict(), "params": params, "replicas": replicas},
        "seed": config.seed,
        "wall_clock_seconds": elapsed,
        "graph_digests": result.graphs,
        "summary": result.summary,
        "inconclusive": result.inconclusive,
    }

    if config.output:
        with open(config.output, "w", encoding="utf-8") as f:
            count = write_jsonl(f, result.rows)
        target = summary_path(config.output)
        target.write_text(dumps(sidecar, indent=2) + "\n", encoding="utf-8")
        logger.info(f"Wrote {count} rows to {config.output} and summary to {target}")
    elif stream is not None:
        write_jsonl(stream, result.rows)
        # streamed output carries no timing; it is logged instead
        streamed = {k: v for k, v in sidecar.items() if k != "wall_clock_seconds"}
        stream.write(dumps(streamed) + "\n")
        logger.info(f"{config.name} finished in {elapsed:.2f}s")
    result.summary = sidecar
    return result
