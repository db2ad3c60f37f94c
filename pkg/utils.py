"""
Utility functions for the percolation laboratory
"""

import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

import numpy as np
from scipy import stats

from errors import InvalidParameterError

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


def setup_logging(level: int = logging.INFO, log_file: Optional[str] = None):
    """
    Route log records to stderr and optionally to a file

    Handlers installed by an earlier call are replaced, so main() can run
    repeatedly in one process. Results never go through logging.

    Args:
        level: Root level; --verbose selects logging.DEBUG
        log_file: Extra destination for the same records
    """
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        if getattr(handler, "_percolab", False):
            root_logger.removeHandler(handler)
            handler.close()
    root_logger.setLevel(level)

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
        handler._percolab = True  # type: ignore[attr-defined]
        root_logger.addHandler(handler)

    if log_file:
        logger.info(f"Logging to file: {log_file}")


# ----------------------------------------------------------------------------
# Random streams
# ----------------------------------------------------------------------------

def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """
    Counter-based generator keyed by (seed, stream)

    Philox is keyed with the 128-bit value seed || stream, so replica r of job
    seed s draws from the same numbers no matter which thread runs it.
    """
    key = ((int(seed) & MASK64) << 64) | (int(stream) & MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *labels: Any) -> int:
    """Deterministic 64-bit sub-seed for a labelled sub-computation"""
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(seed) & MASK64).encode('ascii'))
    for label in labels:
        digest.update(b'\x1f')
        digest.update(repr(label).encode('utf-8'))
    return int.from_bytes(digest.digest(), 'little')


# ----------------------------------------------------------------------------
# Validation helpers
# ----------------------------------------------------------------------------

def check_probability(value: float, name: str = "p", open_low: bool = False,
                      open_high: bool = False) -> float:
    """Raise InvalidParameterError unless value lies in the requested interval"""
    value = float(value)
    low_ok = value > 0 if open_low else value >= 0
    high_ok = value < 1 if open_high else value <= 1
    if not (low_ok and high_ok) or np.isnan(value):
        lo = '(' if open_low else '['
        hi = ')' if open_high else ']'
        raise InvalidParameterError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def check_positive_int(value: int, name: str, minimum: int = 1) -> int:
    if int(value) != value or value < minimum:
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


def size_threshold(alpha: float, n_vertices: int) -> int:
    """Smallest cluster size k with k/|V| >= alpha"""
    k = int(np.ceil(alpha * n_vertices - 1e-9))
    return max(k, 1)


# ----------------------------------------------------------------------------
# Statistics
# ----------------------------------------------------------------------------

def wilson_interval(successes: float, trials: int, confidence: float = 0.95):
    """
    Wilson score interval for a binomial proportion

    Successes may be fractional (averaged indicator values in [0, 1]); the
    interval is then conservative because such averages have variance at most
    that of a Bernoulli with the same mean.

    Returns:
        Tuple (estimate, lower, upper)
    """
    if trials <= 0:
        return 0.0, 0.0, 1.0
    z = stats.norm.ppf(1 - (1 - confidence) / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = phat + z * z / (2 * trials)
    adj_std = np.sqrt(max(phat * (1 - phat), 0.0) / trials + z * z / (4 * trials * trials))
    lower = (centre - z * adj_std) / denom
    upper = (centre + z * adj_std) / denom
    return float(phat), float(max(0.0, lower)), float(min(1.0, upper))


def wilson_arrays(successes: np.ndarray, trials: np.ndarray, confidence: float = 0.95):
    """Vectorised Wilson interval; returns (estimate, lower, upper) arrays"""
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)
    z = stats.norm.ppf(1 - (1 - confidence) / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = phat + z * z / (2 * trials)
    adj_std = np.sqrt(np.clip(phat * (1 - phat), 0, None) / trials + z * z / (4 * trials ** 2))
    lower = np.clip((centre - z * adj_std) / denom, 0.0, 1.0)
    upper = np.clip((centre + z * adj_std) / denom, 0.0, 1.0)
    return phat, lower, upper


def isotonic_regression(y: Sequence[float], w: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Weighted pool-adjacent-violators fit of a nondecreasing sequence

    Args:
        y: Values in grid order
        w: Positive weights (defaults to ones)

    Returns:
        Nondecreasing array minimising the weighted squared error
    """
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)

    # Each block: (mean, weight, length)
    means: List[float] = []
    weights: List[float] = []
    lengths: List[int] = []
    for value, weight in zip(y, w):
        means.append(float(value))
        weights.append(float(weight))
        lengths.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            total = weights[-2] + weights[-1]
            merged = (means[-2] * weights[-2] + means[-1] * weights[-1]) / total
            length = lengths[-2] + lengths[-1]
            del means[-1], weights[-1], lengths[-1]
            means[-1], weights[-1], lengths[-1] = merged, total, length

    return np.repeat(np.asarray(means), lengths)


def binomial_weights(m: int, p: float) -> np.ndarray:
    """Binomial(m, p) probabilities for 0..m"""
    return stats.binom.pmf(np.arange(m + 1), m, p)


def mean_confidence(values: Sequence[float], confidence: float = 0.95):
    """Sample mean with a normal-approximation interval"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0, 0.0, 0.0
    mean = float(values.mean())
    if values.size == 1:
        return mean, mean, mean
    z = stats.norm.ppf(1 - (1 - confidence) / 2)
    half = z * float(values.std(ddof=1)) / np.sqrt(values.size)
    return mean, mean - half, mean + half


# ----------------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------------

def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(data: Any, indent: Optional[int] = None) -> str:
    """JSON encoding that understands numpy scalars and arrays"""
    if indent is None:
        return json.dumps(data, default=_json_default, separators=(',', ':'))
    return json.dumps(data, default=_json_default, indent=indent)


def write_jsonl(stream: TextIO, rows: Iterable[Dict[str, Any]]) -> int:
    """Write newline-delimited single-line JSON objects; returns row count"""
    count = 0
    for row in rows:
        stream.write(dumps(row))
        stream.write('\n')
        count += 1
    return count


def write_csv(stream: TextIO, rows: Sequence[Dict[str, Any]],
              header: Optional[Dict[str, Any]] = None, columns: Optional[List[str]] = None):
    """
    Write rows as comma-separated values with '#'-prefixed header comments

    Args:
        stream: Output stream
        rows: Dictionaries sharing the same keys
        header: Provenance entries written as '# key: value' lines
        columns: Column order (defaults to the keys of the first row)
    """
    for key, value in (header or {}).items():
        text = value if isinstance(value, str) else dumps(value)
        stream.write(f"# {key}: {text}\n")
    if not rows:
        return
    columns = columns or list(rows[0].keys())
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in columns})


def read_csv_rows(path: str) -> List[Dict[str, str]]:
    """Read a CSV written by write_csv, skipping header comments"""
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
