#!/usr/bin/env python3
"""
Percolation laboratory

Main entry point for the application.

Usage:
  python main.py gen --family torus --dims 4,4
  python main.py curve --family complete --n 200 --alpha 0.5 --points 81
  python main.py experiment kn-box-k2 --n 500 --seed 7 --output kn.jsonl
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

import runner
from cli import dispatch
from config import LabConfig, __version__
from errors import ConfigError, PercolabError
from experiments import EXPERIMENTS
from utils import setup_logging

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as ConfigError instead of exiting"""

    def error(self, message):
        raise ConfigError(message)


def int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def json_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"invalid JSON: {e}")


def _common_parser() -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', type=str,
                        help='Run configuration (flat typed, YAML or JSON)')
    common.add_argument('--lab-config', type=str,
                        help='Tool-wide settings (flat typed, YAML or JSON)')
    common.add_argument('--threads', type=int,
                        help='Worker threads (output is identical for any count)')
    common.add_argument('--confidence', type=float,
                        help='Confidence level of reported intervals')
    common.add_argument('--progress', action='store_true', default=None,
                        help='Show progress bars (needs tqdm)')
    common.add_argument('--output', '-o', type=str,
                        help='Write results to this file instead of stdout')
    common.add_argument('--format', choices=['jsonl', 'csv'], default='jsonl',
                        help='Row format for tabular results (default: jsonl)')
    common.add_argument('--seed', type=int, help='Job seed')
    common.add_argument('--replicas', type=int, help='Number of replicas')
    common.add_argument('--verbose', '-v', action='store_true',
                        help='Enable verbose logging')
    common.add_argument('--log-file', type=str,
                        help='Write logs to file')
    return common


def _graph_parser() -> argparse.ArgumentParser:
    graph = ArgumentParser(add_help=False)
    graph.add_argument('--family', type=str,
                       help='cycle, torus, hypercube, complete, kn-box-k2, cayley, '
                            'molecular-chain, path-pair')
    graph.add_argument('--n', type=int, help='Size parameter (cycle, complete, kn-box-k2, chain)')
    graph.add_argument('--dims', type=int_list, help='Torus side lengths, e.g. 16,16')
    graph.add_argument('--d', type=int, help='Hypercube dimension')
    graph.add_argument('--moduli', type=int_list, help='Cayley group moduli')
    graph.add_argument('--generators', type=json_value, help='Cayley generators as JSON')
    graph.add_argument('--chain-exponent', type=float, help='Molecular-chain window exponent')
    graph.add_argument('--graph-json', type=str, help='Graph description file written by gen')
    return graph


def parse_arguments(argv: Optional[List[str]] = None):
    """Parse command line arguments"""
    common, graph = _common_parser(), _graph_parser()
    parser = ArgumentParser(
        prog='percolab',
        description="Bernoulli bond percolation laboratory for finite transitive graphs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  percolab gen --family torus --dims 4,4
  percolab sim --family complete --n 100 --p 0.02 --replicas 1000
  percolab threshold --family complete --n 400 --alpha 0.5 --delta 0.5
  percolab separator --family complete --n 6 --theta 0.3333
  percolab oracle-validate
  percolab experiment kn-box-k2 --n 500 --seed 7 --output kn.jsonl
        """
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    def add(name: str, help_text: str, with_graph: bool = True) -> argparse.ArgumentParser:
        parents = [common, graph] if with_graph else [common]
        return sub.add_parser(name, help=help_text, parents=parents)

    gen = add('gen', 'Build a graph and print its JSON description')
    gen.add_argument('--describe', action='store_true',
                     help='Print sizes, diameter bracket, density and invariant checks instead')

    sim = add('sim', 'Direct Bernoulli(p) replicas: |K1|, |K2| per replica')
    sim.add_argument('--p', type=float)
    sim.add_argument('--alpha', type=float, help='Also flag |K1| >= alpha |V|')

    sweep = add('sweep', 'Edge-insertion sweeps, per m or mixed at --p-grid')
    sweep.add_argument('--p-grid', type=float_list)

    curve = add('curve', 'Estimate f(p) = P_p(|K1| >= alpha |V|) on a grid')
    curve.add_argument('--alpha', type=float)
    curve.add_argument('--p-grid', type=float_list)
    curve.add_argument('--p-min', type=float)
    curve.add_argument('--p-max', type=float)
    curve.add_argument('--points', type=int)
    curve.add_argument('--method', choices=['sweep', 'direct'])
    curve.add_argument('--delta', type=float, help='Also report the interval I and the set Q')

    threshold = add('threshold', 'Estimate p_c(alpha, delta)')
    threshold.add_argument('--alpha', type=float)
    threshold.add_argument('--delta', type=float)
    threshold.add_argument('--tolerance', type=float)

    ratio = add('ratio', 'Sharp density ratio p_c(beta, 1-delta) / p_c(beta, delta)')
    ratio.add_argument('--beta', type=float)
    ratio.add_argument('--delta', type=float)
    ratio.add_argument('--tolerance', type=float)

    twopoint = add('twopoint', 'Two-point function from a source vertex')
    twopoint.add_argument('--p', type=float)
    twopoint.add_argument('--source', type=int)

    couple = add('couple', 'Sample a monotone pair omega_q <= omega_p')
    couple.add_argument('--q', type=float)
    couple.add_argument('--p', type=float)
    couple.add_argument('--stream', type=int)

    sandcastle = add('sandcastle', 'Sandcastle frequency per probe vertex')
    for flag in ('--p', '--q', '--alpha', '--beta'):
        sandcastle.add_argument(flag, type=float)
    sandcastle.add_argument('--inner-replicas', type=int)
    sandcastle.add_argument('--probes', type=int_list)

    activate = add('activate', 'Probability that an edge set activates a giant')
    activate.add_argument('--h-edges', type=int_list)
    activate.add_argument('--alpha', type=float)
    activate.add_argument('--p', type=float)

    separator = add('separator', 'Minimum degree-balanced edge separator')
    separator.add_argument('--theta', type=float)
    separator.add_argument('--mode', choices=['exact', 'heuristic'])
    separator.add_argument('--restarts', type=int)

    molecular = add('molecular', 'Search orbit unions that split the graph')
    molecular.add_argument('--c-bound', type=float, help='Allow |F| <= C |V| (default 4)')
    molecular.add_argument('--m-max', type=int)
    molecular.add_argument('--theta', type=float)

    validate = add('oracle-validate', 'Monte Carlo against exact values on tiny graphs',
                   with_graph=False)
    validate.add_argument('--alpha', type=float)

    experiment = add('experiment', 'Run a named reproduction experiment', with_graph=False)
    experiment.add_argument('name', choices=sorted(EXPERIMENTS))
    for flag in ('--n', '--a', '--b'):
        experiment.add_argument(flag, type=int)
    for flag in ('--c', '--p', '--alpha', '--beta', '--delta', '--epsilon',
                 '--exponent', '--tolerance', '--bound-factor'):
        experiment.add_argument(flag, type=float)
    experiment.add_argument('--family', choices=['complete', 'kn-box-k2'])
    experiment.add_argument('--sizes', type=int_list)
    experiment.add_argument('--param', action='append', metavar='KEY=VALUE',
                            help='Any schema parameter, value parsed as JSON')

    return parser.parse_args(argv)


def load_lab_config(args) -> LabConfig:
    """Tool-wide settings from --lab-config with flag overrides"""
    lab = LabConfig.from_file(args.lab_config) if args.lab_config else LabConfig()
    if args.threads is not None:
        lab.threads = args.threads
    if args.confidence is not None:
        lab.confidence = args.confidence
    if args.progress:
        lab.progress = True
    lab.validate()
    runner.configure(lab.threads, lab.progress)
    return lab


def fail(error: PercolabError) -> int:
    message = " ".join(str(error).split())
    print(f"error kind={error.kind} message={message}", file=sys.stderr)
    return error.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    try:
        args = parse_arguments(argv)
    except ConfigError as e:
        return fail(e)

    # Setup logging
    log_level = logging.DEBUG if args.verbose else logging.INFO
    setup_logging(log_level, args.log_file)

    try:
        lab = load_lab_config(args)
        return dispatch(args, lab)
    except PercolabError as e:
        return fail(e)
    except FileNotFoundError as e:
        return fail(ConfigError(str(e)))
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        return 130
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
