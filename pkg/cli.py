"""
Command-line handlers

One handler per subcommand; each maps onto a single library operation and
returns the process exit code.
"""

import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO

import numpy as np

import coupling
import estimators
import experiments
import graphs
import oracle
import percolation
import structure
from config import ExperimentConfig, LabConfig, __version__
from errors import ConfigError
from models import Graph
from utils import dumps, size_threshold, write_csv, write_jsonl

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INCONCLUSIVE = 3

GRAPH_FLAGS = {
    "n": "n", "dims": "dims", "d": "d", "moduli": "moduli",
    "generators": "generators", "chain_exponent": "alpha",
}

# Options every subcommand shares; they live at the top level of a run config
SHARED_OPTIONS = {
    "command", "config", "lab_config", "threads", "confidence", "progress", "output",
    "format", "seed", "replicas", "verbose", "log_file", "family", "graph_json",
}


class Context:
    """Parsed flags, the optional config file and tool-wide settings"""

    def __init__(self, args, lab: LabConfig, config: Optional[ExperimentConfig] = None):
        self.args = args
        self.lab = lab
        self.config = config or ExperimentConfig(name=args.command)
        if self.config.name != args.command:
            raise ConfigError(
                f"config is for {self.config.name!r}, not the {args.command!r} subcommand"
            )

    def check_params(self):
        """Reject config params the subcommand has no option for"""
        accepted = set(vars(self.args)) - SHARED_OPTIONS - set(GRAPH_FLAGS)
        unknown = sorted(set(self.config.params) - accepted)
        if unknown:
            raise ConfigError(
                f"unknown parameter(s) for {self.args.command}: {', '.join(unknown)}; "
                f"accepted: {', '.join(sorted(accepted)) or 'none'}"
            )

    def param(self, name: str, default: Any = None, required: bool = False) -> Any:
        """Flag value, else config value, else default"""
        value = getattr(self.args, name, None)
        if value is None:
            value = self.config.params.get(name)
        if value is None:
            value = default
        if value is None and required:
            raise ConfigError(f"parameter {name!r} is required (flag --{name.replace('_', '-')})")
        return value

    @property
    def seed(self) -> int:
        return self.args.seed if getattr(self.args, "seed", None) is not None else self.config.seed

    def replicas(self, default: int) -> int:
        value = getattr(self.args, "replicas", None)
        if value is None:
            value = self.config.replicas
        return default if value is None else value

    @property
    def output(self) -> Optional[str]:
        return self.args.output or self.config.output

    def graph(self) -> Graph:
        spec: Dict[str, Any] = dict(self.config.graph)
        if getattr(self.args, "family", None):
            spec["family"] = self.args.family
        for flag, key in GRAPH_FLAGS.items():
            value = getattr(self.args, flag, None)
            if value is not None:
                spec[key] = value
        if getattr(self.args, "graph_json", None):
            spec = {"family": "json", "graph": json.loads(Path(self.args.graph_json).read_text(encoding="utf-8"))}
        if "family" not in spec:
            raise ConfigError("no graph given; use --family or a graph section in --config")
        graph = graphs.graph_from_spec(spec)
        logger.info(f"Graph {graph.family_tag}: |V|={graph.n_vertices}, |E|={graph.m_edges}")
        return graph


@contextmanager
def output_stream(path: Optional[str]) -> Iterator[TextIO]:
    """The output file, or stdout when no path is given"""
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8") as f:
        yield f
    logger.info(f"Wrote {path}")


def emit(ctx: Context, data: Dict[str, Any]):
    with output_stream(ctx.output) as stream:
        stream.write(dumps(data, indent=2) + "\n")


def emit_rows(ctx: Context, rows: Sequence[Dict[str, Any]], header: Optional[Dict[str, Any]] = None):
    with output_stream(ctx.output) as stream:
        if ctx.args.format == "csv":
            write_csv(stream, rows, header={"version": __version__, "seed": ctx.seed, **(header or {})})
        else:
            write_jsonl(stream, rows)


def emit_estimate(ctx: Context, data: Dict[str, Any], header: Dict[str, Any]):
    """One estimate as a CSV row or as a JSON object, depending on --format"""
    if ctx.args.format == "csv":
        emit_rows(ctx, [data], header)
    else:
        emit(ctx, data)


def write_sidecar(ctx: Context, graph: Graph, params: Dict[str, Any]):
    """JSON provenance next to the output file: parameters, seed and the serialized graph"""
    if not ctx.output:
        return
    target = experiments.summary_path(ctx.output)
    target.write_text(dumps({
        "version": __version__, "command": ctx.args.command, "params": params,
        "seed": ctx.seed, "graph_digest": graph.digest, "graph": graph.to_dict(),
    }, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote sidecar {target}")


def _flags_for(alpha: Optional[float], graph: Graph) -> Dict[str, Any]:
    if alpha is None:
        return {}
    target = size_threshold(alpha, graph.n_vertices)
    return {"k1_at_least_alpha": lambda _omega, dec: dec.k1 >= target}


# ----------------------------------------------------------------------------
# Graphs and sampling
# ----------------------------------------------------------------------------

def cmd_gen(ctx: Context) -> int:
    graph = ctx.graph()
    if not ctx.args.describe:
        with output_stream(ctx.output) as stream:
            stream.write(graph.to_json() + "\n")
        return EXIT_OK

    lower, upper = graphs.diameter_bracket(
        graph, ctx.lab.diameter_exact_limit, ctx.lab.diameter_sample_sources, ctx.seed
    )
    emit(ctx, {
        "family": graph.family_tag, "n_vertices": graph.n_vertices, "m_edges": graph.m_edges,
        "mean_degree": graph.mean_degree, "transitive": graph.transitive,
        "orbits": len(graph.edge_orbits) if graph.edge_orbits is not None else None,
        "diameter_lower": lower, "diameter_upper": upper,
        "degree_diameter_bound": graphs.degree_diameter_bound(graph),
        "density": structure.dense_check(graph).to_dict(),
        "problems": graphs.check_invariants(graph),
        "digest": graph.digest,
    })
    return EXIT_OK


def cmd_sim(ctx: Context) -> int:
    graph = ctx.graph()
    p = ctx.param("p", required=True)
    rows = percolation.simulate(graph, p, ctx.replicas(100), ctx.seed,
                                flags=_flags_for(ctx.param("alpha"), graph))
    emit_rows(ctx, [row.to_dict() for row in rows], {"graph": graph.digest, "p": p})
    return EXIT_OK


def cmd_sweep(ctx: Context) -> int:
    """Mean |K1| and |K2| after m insertions, or mixed at the given p values"""
    graph = ctx.graph()
    replicas = ctx.replicas(100)
    records = percolation.run_sweeps(graph, replicas, ctx.seed)
    k1 = percolation.mean_statistic(records, "k1")
    k2 = percolation.mean_statistic(records, "k2")
    p_values = ctx.param("p_grid")
    if p_values:
        rows = [
            {"p": p, "k1_mean": percolation.binomial_mix(k1, p), "k2_mean": percolation.binomial_mix(k2, p)}
            for p in p_values
        ]
    else:
        rows = [{"m": m, "k1_mean": a, "k2_mean": b} for m, (a, b) in enumerate(zip(k1.tolist(), k2.tolist()))]
    emit_rows(ctx, rows, {"graph": graph.digest, "replicas": replicas})
    return EXIT_OK


def cmd_twopoint(ctx: Context) -> int:
    graph = ctx.graph()
    profile = percolation.two_point_profile(
        graph, ctx.param("p", required=True), ctx.param("source", 0), ctx.replicas(1000), ctx.seed,
        confidence=ctx.lab.confidence,
    )
    rows = [
        {"v": v, "estimate": float(e), "ci_lo": float(lo), "ci_hi": float(hi)}
        for v, (e, lo, hi) in enumerate(zip(profile.estimates, profile.ci_lo, profile.ci_hi))
    ]
    logger.info(f"Minimum two-point function {profile.minimum:.4f} at v={profile.argmin} "
                f"[{profile.ci_lo[profile.argmin]:.4f}, {profile.ci_hi[profile.argmin]:.4f}]")
    emit_rows(ctx, rows, {"graph": graph.digest, "source": profile.source, "p": profile.p})
    return EXIT_OK


# ----------------------------------------------------------------------------
# Estimators
# ----------------------------------------------------------------------------

def _p_grid(ctx: Context) -> np.ndarray:
    grid = ctx.param("p_grid")
    if grid:
        return np.asarray(grid, dtype=float)
    return np.linspace(ctx.param("p_min", 0.0), ctx.param("p_max", 1.0), ctx.param("points", 101))


def cmd_curve(ctx: Context) -> int:
    graph = ctx.graph()
    grid = _p_grid(ctx)
    replicas = ctx.replicas(1000)
    curve = estimators.estimate_curve(
        graph, ctx.param("alpha", required=True), grid, replicas, ctx.seed,
        method=ctx.param("method", "sweep"), confidence=ctx.lab.confidence,
    )
    header = {"graph": graph.digest, "alpha": curve.alpha, "method": curve.method}
    delta = ctx.param("delta")
    write_sidecar(ctx, graph, {
        "alpha": curve.alpha, "method": curve.method, "replicas": replicas,
        "confidence": ctx.lab.confidence, "p_grid": grid.tolist(), "delta": delta,
    })
    if delta is None:
        emit_rows(ctx, curve.rows(), header)
        return EXIT_OK

    q_set = estimators.q_set_and_interval(curve, delta, bandwidth=ctx.lab.derivative_bandwidth,
                                          min_cells=ctx.lab.min_q_cells)
    emit(ctx, {"curve": curve.rows(), "q_set": q_set.to_dict(), **header})
    return EXIT_OK


def _threshold_params(ctx: Context) -> Dict[str, Any]:
    return {
        "tolerance": ctx.param("tolerance", estimators.DEFAULT_TOLERANCE),
        "budget": ctx.lab.threshold_budget, "batch": ctx.lab.threshold_batch,
        "confidence": ctx.lab.confidence,
    }


def cmd_threshold(ctx: Context) -> int:
    graph = ctx.graph()
    params = {"alpha": ctx.param("alpha", required=True), "delta": ctx.param("delta", required=True),
              **_threshold_params(ctx)}
    estimate = estimators.threshold(graph, seed=ctx.seed, **params)
    write_sidecar(ctx, graph, params)
    emit_estimate(ctx, estimate.to_dict(), {"graph": graph.digest})
    return EXIT_INCONCLUSIVE if estimate.inconclusive else EXIT_OK


def cmd_ratio(ctx: Context) -> int:
    graph = ctx.graph()
    params = {"beta": ctx.param("beta", required=True), "delta": ctx.param("delta", required=True),
              **_threshold_params(ctx)}
    ratio = estimators.sharp_density_ratio(graph, seed=ctx.seed, **params)
    write_sidecar(ctx, graph, params)
    emit(ctx, ratio.to_dict())
    return EXIT_INCONCLUSIVE if ratio.inconclusive else EXIT_OK


# ----------------------------------------------------------------------------
# Coupling
# ----------------------------------------------------------------------------

def cmd_couple(ctx: Context) -> int:
    graph = ctx.graph()
    pair = coupling.sample_coupled(graph, ctx.param("q", required=True), ctx.param("p", required=True),
                                   ctx.seed, ctx.param("stream", 0))
    low = percolation.clusters(graph, pair.omega_q)
    high = percolation.clusters(graph, pair.omega_p)
    emit(ctx, {
        "q": pair.q, "p": pair.p,
        "open_q": pair.omega_q.open_edges.tolist(), "open_p": pair.omega_p.open_edges.tolist(),
        "monotone": pair.omega_q.is_subset_of(pair.omega_p),
        "k1_q": low.k1, "k2_q": low.k2, "k1_p": high.k1, "k2_p": high.k2,
    })
    return EXIT_OK


def cmd_sandcastle(ctx: Context) -> int:
    graph = ctx.graph()
    probes = ctx.param("probes") or coupling.default_probes(graph, ctx.lab.probe_count)
    frequency = coupling.sandcastle_frequency(
        graph, ctx.param("p", required=True), ctx.param("q", required=True),
        ctx.param("alpha", required=True), ctx.param("beta", required=True),
        ctx.replicas(200), ctx.seed,
        inner_replicas=ctx.param("inner_replicas", ctx.lab.inner_replicas),
        probes=probes, threshold=ctx.lab.sandcastle_threshold, confidence=ctx.lab.confidence,
    )
    emit(ctx, frequency.to_dict())
    return EXIT_OK


def cmd_activate(ctx: Context) -> int:
    graph = ctx.graph()
    h_edges = ctx.param("h_edges", required=True)
    alpha, p = ctx.param("alpha", required=True), ctx.param("p", required=True)
    estimate = coupling.activator_probability(graph, h_edges, alpha, p, ctx.replicas(10000), ctx.seed,
                                              confidence=ctx.lab.confidence)
    result: Dict[str, Any] = {"h_edges": list(h_edges), "alpha": alpha, "p": p, "estimate": estimate.to_dict()}
    if graph.m_edges <= ctx.lab.oracle_max_edges:
        counts = oracle.exact_event(graph, coupling.activation_event(h_edges, alpha), ctx.lab.oracle_max_edges)
        result["exact"] = float(oracle.evaluate(counts, p))
    emit(ctx, result)
    return EXIT_OK


# ----------------------------------------------------------------------------
# Structure and validation
# ----------------------------------------------------------------------------

def cmd_separator(ctx: Context) -> int:
    graph = ctx.graph()
    result = structure.separator(
        graph, ctx.param("theta", 1 / 3), mode=ctx.param("mode", "exact"),
        restarts=ctx.param("restarts", ctx.lab.separator_restarts), seed=ctx.seed,
        max_exact_vertices=ctx.lab.exact_separator_max_vertices,
    )
    emit(ctx, result.to_dict())
    return EXIT_OK


def cmd_molecular(ctx: Context) -> int:
    graph = ctx.graph()
    report = structure.molecular_search(graph, ctx.param("c_bound", 4.0), ctx.param("m_max", 64),
                                        dense_floor=ctx.lab.dense_floor)
    result: Dict[str, Any] = {
        "family": graph.family_tag,
        "density": structure.dense_check(graph).to_dict(),
        "molecular": report.to_dict() if report else None,
    }
    if report is not None:
        witness = structure.separator_from_molecule(graph, report, ctx.param("theta", 1 / 3))
        result["separator_witness"] = witness.to_dict()
    emit(ctx, result)
    return EXIT_OK


def cmd_oracle_validate(ctx: Context) -> int:
    report = oracle.validate_battery(
        replicas=ctx.replicas(100_000), seed=ctx.seed, alpha=ctx.param("alpha", 0.5),
        confidence=ctx.lab.confidence,
    )
    emit(ctx, {
        "pass_fraction": report.pass_fraction, "passed": report.passed,
        "cells": report.rows, "russo": report.russo,
    })
    if not report.passed:
        logger.error(f"Oracle battery failed: {report.pass_fraction:.3f} of cells within tolerance")
        return EXIT_FAILED
    return EXIT_OK


def cmd_experiment(ctx: Context) -> int:
    config = ctx.config
    overrides: Dict[str, Any] = {"params": experiment_overrides(ctx.args)}
    overrides.update(replicas=ctx.args.replicas, seed=ctx.args.seed, output=ctx.args.output)
    config = config.merged(overrides)
    result = experiments.run_experiment(config, ctx.lab, stream=sys.stdout)
    return EXIT_INCONCLUSIVE if result.inconclusive else EXIT_OK


EXPERIMENT_FLAGS = ("n", "c", "p", "a", "b", "alpha", "beta", "delta", "epsilon",
                    "exponent", "tolerance", "bound_factor", "family", "sizes")


def experiment_overrides(args) -> Dict[str, Any]:
    """Experiment parameters given as flags or as --param key=value"""
    params = {key: getattr(args, key) for key in EXPERIMENT_FLAGS if getattr(args, key, None) is not None}
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            params[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            params[key.strip()] = raw
    return params


COMMANDS = {
    "gen": cmd_gen, "sim": cmd_sim, "sweep": cmd_sweep, "curve": cmd_curve,
    "threshold": cmd_threshold, "ratio": cmd_ratio, "twopoint": cmd_twopoint,
    "couple": cmd_couple, "sandcastle": cmd_sandcastle, "activate": cmd_activate,
    "separator": cmd_separator, "molecular": cmd_molecular,
    "oracle-validate": cmd_oracle_validate, "experiment": cmd_experiment,
}


def dispatch(args, lab: LabConfig) -> int:
    config = ExperimentConfig.from_file(args.config) if args.config else None
    if args.command == "experiment":
        if config is not None and config.name != args.name:
            raise ConfigError(f"config names experiment {config.name!r}, not {args.name!r}")
        config = config or ExperimentConfig(name=args.name)
        args.command = config.name
        ctx = Context(args, lab, config)
        return cmd_experiment(ctx)
    ctx = Context(args, lab, config)
    ctx.check_params()
    return COMMANDS[args.command](ctx)
