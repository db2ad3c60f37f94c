"""
Threshold landscape estimators

f(p) = P_p(|K1|/|V| >= alpha) is charted from one pool of permutation
sweeps: a sweep crosses the size target at step m*, so the event holds at p
with conditional probability P(Bin(|E|, p) >= m*), and every p on a grid or
visited by a bisection reuses the same pool.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, stats

import oracle
import runner
from errors import ContractViolationError, InvalidParameterError, ResolutionError
from models import (
    EmpiricalCurve, FindingParametersReport, Graph, LevelCounts, ProportionEstimate,
    QSetEstimate, SharpnessRatio, SprinklingSequence, SupercriticalVerdict, ThresholdEstimate,
)
from percolation import clusters, crossing_points, sample
from utils import (
    check_positive_int, check_probability, derive_seed, isotonic_regression, size_threshold,
    wilson_arrays, wilson_interval,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 0.01
DEFAULT_BUDGET = 20000
DEFAULT_BATCH = 64
DERIVATIVE_BANDWIDTH = 3
MIN_Q_CELLS = 16
SEQUENCE_FLOOR = 1e-12
THRESHOLD_FLOOR = 1e-12


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


class CrossingPool:
    """
    Growing pool of sweep crossing indices for one size target

    Sweep r of the pool uses stream r of the pool seed, so extending the pool
    never changes sweeps already drawn.
    """

    def __init__(self, graph: Graph, alpha: float, seed: int, threads: Optional[int] = None):
        self.graph = graph
        self.alpha = _check_alpha(alpha)
        self.target = size_threshold(self.alpha, graph.n_vertices)
        self.seed = seed
        self.threads = threads
        self.points = np.empty(0, dtype=np.int64)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def extend(self, count: int):
        if count <= 0:
            return
        fresh = crossing_points(self.graph, self.target, count, self.seed,
                                start=self.size, threads=self.threads)
        self.points = np.concatenate([self.points, fresh])
        logger.debug(f"Crossing pool for alpha={self.alpha} now holds {self.size} sweeps")

    def successes(self, p: Union[float, Sequence[float]]) -> np.ndarray:
        """Sum over sweeps of P(Bin(|E|, p) >= m*) for each p"""
        values, counts = np.unique(self.points, return_counts=True)
        p = np.atleast_1d(np.asarray(p, dtype=float))
        tail = stats.binom.sf(values[None, :] - 1, self.graph.m_edges, p[:, None])
        return tail @ counts

    def estimate(self, p: float, confidence: float = 0.95) -> ProportionEstimate:
        successes = float(self.successes(p)[0])
        estimate, lo, hi = wilson_interval(successes, self.size, confidence)
        return ProportionEstimate(successes, self.size, estimate, lo, hi)

    def invert(self, level: float) -> float:
        """p where the pooled estimate of f equals level"""
        size = self.size

        def gap(p: float) -> float:
            return float(self.successes(p)[0]) / size - level

        if gap(0.0) >= 0:
            return 0.0
        if gap(1.0) <= 0:
            return 1.0
        return float(optimize.brentq(gap, 0.0, 1.0, xtol=1e-12))


# ----------------------------------------------------------------------------
# Curves
# ----------------------------------------------------------------------------

def _direct_successes(graph: Graph, target: int, p_grid: np.ndarray, replicas: int,
                      seed: int, threads: Optional[int]) -> np.ndarray:
    successes = np.zeros(p_grid.shape[0])
    for i, p in enumerate(p_grid):
        point_seed = derive_seed(seed, "curve-point", i)

        def task(r: int, p=p, point_seed=point_seed) -> bool:
            return clusters(graph, sample(graph, p, point_seed, r)).k1 >= target

        successes[i] = sum(runner.run_replicas(task, replicas, threads=threads))
    return successes


def estimate_curve(graph: Graph, alpha: float, p_grid: Sequence[float], replicas_per_point: int,
                   seed: int, method: str = "sweep", confidence: float = 0.95,
                   threads: Optional[int] = None) -> EmpiricalCurve:
    """
    Monte Carlo estimate of f(p) = P_p(|K1| >= alpha) on a grid

    Args:
        graph: Host graph
        alpha: Density threshold in (0, 1]
        p_grid: Increasing parameters in [0, 1]
        replicas_per_point: Sweeps in the pool ("sweep") or samples per point ("direct")
        seed: Job seed
        method: "sweep" mixes one sweep pool to all points; "direct" samples each point
        confidence: Wilson confidence level

    Returns:
        EmpiricalCurve with an isotonic f_hat and monotone confidence bounds

    Raises:
        InvalidParameterError: On an empty or non-increasing grid
    """
    alpha = _check_alpha(alpha)
    grid = np.asarray(p_grid, dtype=float)
    if grid.size == 0:
        raise InvalidParameterError("p grid must be nonempty")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise InvalidParameterError("p grid must be strictly increasing within [0, 1]")
    check_positive_int(replicas_per_point, "replicas_per_point")
    target = size_threshold(alpha, graph.n_vertices)

    if method == "sweep":
        pool = CrossingPool(graph, alpha, derive_seed(seed, "curve", alpha), threads)
        pool.extend(replicas_per_point)
        successes = pool.successes(grid)
    elif method == "direct":
        successes = _direct_successes(graph, target, grid, replicas_per_point, seed, threads)
    else:
        raise InvalidParameterError(f"unknown curve method {method!r}")

    trials = np.full(grid.shape[0], replicas_per_point, dtype=np.int64)
    raw, lo, hi = wilson_arrays(successes, trials, confidence)
    f_hat = isotonic_regression(raw, trials)

    breach = np.abs(f_hat - raw) > (hi - lo)
    if breach.any():
        logger.warning(
            f"isotonic fit moved {int(breach.sum())} grid point(s) by more than their interval width"
        )

    lo = np.maximum.accumulate(lo)
    hi = np.minimum.accumulate(hi[::-1])[::-1]
    f_hat = np.clip(f_hat, lo, np.maximum(hi, lo))
    lo = np.minimum(lo, f_hat)
    hi = np.maximum(hi, f_hat)

    logger.info(f"Estimated f on {grid.size} points of {graph.family_tag} (alpha={alpha}, {method})")
    return EmpiricalCurve(
        alpha=alpha, p_grid=grid, successes=np.asarray(successes, dtype=float), trials=trials,
        f_hat=f_hat, ci_lo=lo, ci_hi=hi, method=method,
    )


# ----------------------------------------------------------------------------
# Thresholds
# ----------------------------------------------------------------------------

def threshold_from_pool(pool: CrossingPool, delta: float,
                        tolerance: float = DEFAULT_TOLERANCE,
                        budget: int = DEFAULT_BUDGET,
                        batch: int = DEFAULT_BATCH,
                        confidence: float = 0.95,
                        lower: float = 0.0) -> ThresholdEstimate:
    """
    Adaptive stochastic bisection for f(p) = delta on a crossing pool

    At each probe the pool grows (doubling from batch) until the Wilson
    interval excludes delta or the pool reaches budget; a probe that still
    straddles delta stops the search and the current bracket is returned
    flagged inconclusive.

    The search stops once hi - lo <= tolerance * hi, so the bracket is
    resolved relative to the threshold itself (p_c ~ c/n on K_n). It starts
    from [lower, 1]; lower must be a point already known to sit below the root.
    """
    delta = check_probability(delta, "delta", open_low=True, open_high=True)
    tolerance = float(tolerance)
    if not 0 < tolerance < 1:
        raise InvalidParameterError(f"tolerance must lie in (0, 1), got {tolerance}")
    if pool.size == 0:
        pool.extend(min(batch, budget))

    lo, hi = check_probability(lower, "lower"), 1.0
    inconclusive = False
    while hi - lo > tolerance * hi and hi > THRESHOLD_FLOOR and not inconclusive:
        mid = 0.5 * (lo + hi)
        while True:
            est = pool.estimate(mid, confidence)
            if est.ci_lo > delta:
                hi = mid
                break
            if est.ci_hi < delta:
                lo = mid
                break
            if pool.size >= budget:
                inconclusive = True
                break
            pool.extend(min(pool.size, budget - pool.size))

    if inconclusive:
        logger.warning(
            f"threshold for alpha={pool.alpha}, delta={delta} inconclusive after "
            f"{pool.size} sweeps; bracket [{lo:.6g}, {hi:.6g}]"
        )

    p_hat = pool.invert(delta)
    return ThresholdEstimate(
        alpha=pool.alpha, delta=delta, p_hat=p_hat,
        p_lo=min(lo, p_hat), p_hi=max(hi, p_hat),
        replicas_used=pool.size, inconclusive=inconclusive,
    )


def threshold(graph: Graph, alpha: float, delta: float,
              tolerance: float = DEFAULT_TOLERANCE, seed: int = 0,
              budget: int = DEFAULT_BUDGET, batch: int = DEFAULT_BATCH,
              confidence: float = 0.95, threads: Optional[int] = None) -> ThresholdEstimate:
    """
    Estimate p_c(alpha, delta), the p where P_p(|K1| >= alpha) reaches delta

    Returns:
        ThresholdEstimate; inconclusive when the budget runs out with a
        straddling interval
    """
    pool = CrossingPool(graph, alpha, derive_seed(seed, "threshold", float(alpha)), threads)
    estimate = threshold_from_pool(pool, delta, tolerance, budget, batch, confidence)
    logger.info(
        f"p_c({alpha}, {delta}) on {graph.family_tag}: {estimate.p_hat:.6g} "
        f"in [{estimate.p_lo:.6g}, {estimate.p_hi:.6g}]"
    )
    return estimate


def sharp_density_ratio(graph: Graph, beta: float, delta: float,
                        tolerance: float = DEFAULT_TOLERANCE, seed: int = 0,
                        budget: int = DEFAULT_BUDGET, batch: int = DEFAULT_BATCH,
                        confidence: float = 0.95, threads: Optional[int] = None) -> SharpnessRatio:
    """
    p_c(beta, 1-delta) / p_c(beta, delta) from one shared sweep pool

    The bracket divides the outer ends of the two threshold brackets. The
    upper search starts from the lower bracket's left end, where f < delta
    < 1 - delta already holds.
    """
    delta = float(delta)
    if not 0 < delta <= 0.5:
        raise InvalidParameterError(f"delta must lie in (0, 1/2], got {delta}")
    pool = CrossingPool(graph, beta, derive_seed(seed, "threshold", float(beta)), threads)
    lower = threshold_from_pool(pool, delta, tolerance, budget, batch, confidence)
    upper = threshold_from_pool(pool, 1 - delta, tolerance, budget, batch, confidence,
                                 lower=lower.p_lo)

    def ratio(a: float, b: float) -> float:
        return a / b if b > 0 else math.inf

    result = SharpnessRatio(
        beta=float(beta), delta=delta,
        ratio=ratio(upper.p_hat, lower.p_hat),
        ratio_lo=ratio(upper.p_lo, lower.p_hi),
        ratio_hi=ratio(upper.p_hi, lower.p_lo),
        lower=lower, upper=upper,
    )
    logger.info(f"Sharpness ratio on {graph.family_tag}: {result.ratio:.4f}")
    return result


def epsilon_supercritical(graph: Graph, p: float, epsilon: float, seed: int = 0,
                          confidence: float = 0.95, budget: int = DEFAULT_BUDGET,
                          batch: int = DEFAULT_BATCH,
                          threads: Optional[int] = None) -> SupercriticalVerdict:
    """
    Test whether p is epsilon-supercritical

    Requires |V| >= 2 epsilon^-3 and P_{(1-epsilon)p}(|K1| >= epsilon) >= epsilon;
    the probability is tested sequentially with a one-sided Wilson bound.
    """
    p = check_probability(p)
    epsilon = check_probability(epsilon, "epsilon", open_low=True, open_high=True)
    size_clause = graph.n_vertices >= 2 * epsilon ** -3
    if not size_clause:
        return SupercriticalVerdict(p, epsilon, False, False, False, None)

    q = (1 - epsilon) * p
    target = size_threshold(epsilon, graph.n_vertices)
    two_sided = 1 - 2 * (1 - confidence)
    stream_seed = derive_seed(seed, "supercritical", p, epsilon)

    def task(r: int) -> bool:
        return clusters(graph, sample(graph, q, stream_seed, r)).k1 >= target

    successes, trials = 0, 0
    step = batch
    while True:
        successes += sum(runner.run_replicas(task, step, threads=threads, start=trials))
        trials += step
        estimate, lo, hi = wilson_interval(successes, trials, two_sided)
        evidence = ProportionEstimate(successes, trials, estimate, lo, hi)
        if lo > epsilon:
            return SupercriticalVerdict(p, epsilon, True, True, False, evidence)
        if hi < epsilon:
            return SupercriticalVerdict(p, epsilon, True, False, False, evidence)
        if trials >= budget:
            logger.warning(f"epsilon-supercriticality of p={p} inconclusive after {trials} samples")
            return SupercriticalVerdict(p, epsilon, True, False, True, evidence)
        step = min(trials, budget - trials)


def typical_density(graph: Graph, p: float, epsilon: float, replicas: int, seed: int = 0,
                    threads: Optional[int] = None) -> float:
    """
    Largest lambda such that a fraction >= epsilon of sampled |K1|/|V| is >= lambda

    Raises:
        InvalidParameterError: If replicas < epsilon^-2
    """
    p = check_probability(p)
    epsilon = check_probability(epsilon, "epsilon", open_low=True, open_high=True)
    if replicas < epsilon ** -2:
        raise InvalidParameterError(f"typical density needs at least {math.ceil(epsilon ** -2)} replicas")
    stream_seed = derive_seed(seed, "typical", p)

    def task(r: int) -> int:
        return clusters(graph, sample(graph, p, stream_seed, r)).k1

    densities = np.sort(np.asarray(runner.run_replicas(task, replicas, threads=threads)))[::-1]
    densities = densities / graph.n_vertices
    return float(densities[math.ceil(epsilon * replicas - 1e-9) - 1])


# ----------------------------------------------------------------------------
# The set Q and sprinkling sequences
# ----------------------------------------------------------------------------

def _inverse(p_grid: np.ndarray, values: np.ndarray, level: float) -> float:
    """Smallest p where the piecewise-linear curve reaches level"""
    above = np.flatnonzero(values >= level)
    if above.size == 0:
        raise ResolutionError(f"curve never reaches {level}; extend the grid")
    i = int(above[0])
    if i == 0:
        if values[0] > level and p_grid[0] > 0:
            raise ResolutionError(f"curve starts above {level}; extend the grid towards 0")
        return float(p_grid[0])
    p0, p1 = p_grid[i - 1], p_grid[i]
    f0, f1 = values[i - 1], values[i]
    return float(p0 + (level - f0) / (f1 - f0) * (p1 - p0))


def _centred_derivative(p_grid: np.ndarray, values: np.ndarray, bandwidth: int) -> np.ndarray:
    n = p_grid.shape[0]
    idx = np.arange(n)
    left = np.clip(idx - bandwidth, 0, n - 1)
    right = np.clip(idx + bandwidth, 0, n - 1)
    return (values[right] - values[left]) / (p_grid[right] - p_grid[left])


def _merge_cells(cells: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    merged: List[Tuple[float, float]] = []
    for a, b in sorted(cells):
        if merged and a <= merged[-1][1] + 1e-15:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def _q_cells(p_grid: np.ndarray, slope: np.ndarray, interval: Tuple[float, float],
             bound: float, min_cells: int) -> List[Tuple[float, float]]:
    """Grid cells clipped to the interval where p f'(p) at the cell midpoint is within bound"""
    a, b = interval
    cells = []
    inside = 0
    for i in range(p_grid.shape[0] - 1):
        lo, hi = max(p_grid[i], a), min(p_grid[i + 1], b)
        if hi <= lo:
            continue
        inside += 1
        mid = 0.5 * (p_grid[i] + p_grid[i + 1])
        if mid * 0.5 * (slope[i] + slope[i + 1]) <= bound:
            cells.append((float(lo), float(hi)))
    if inside < min_cells:
        raise ResolutionError(f"only {inside} grid cells inside I; at least {min_cells} are needed")
    return _merge_cells(cells)


def q_set_and_interval(curve: EmpiricalCurve, delta: float, beta: Optional[float] = None,
                       slope_bound: Optional[float] = None,
                       bandwidth: int = DERIVATIVE_BANDWIDTH,
                       min_cells: int = MIN_Q_CELLS) -> QSetEstimate:
    """
    Estimate I = [p_c(beta, delta), p_c(beta, 1-delta)] and Q = {p in I : p f'(p) <= 4/delta}

    The graph and beta travel with the curve (beta is the curve's alpha), so
    the curve comes first; a beta passed alongside is only checked against it.

    f' comes from centred differences over `bandwidth` grid cells of the
    isotonic curve; Q is a union of grid cells clipped to I.

    Raises:
        ResolutionError: If the curve does not cover I or has too few cells inside it
        ContractViolationError: If beta disagrees with the curve's alpha
    """
    if beta is not None and abs(beta - curve.alpha) > 1e-12:
        raise ContractViolationError(f"curve is for alpha={curve.alpha}, not beta={beta}")
    delta = check_probability(delta, "delta", open_low=True, open_high=True)
    if delta > 0.5:
        raise InvalidParameterError(f"delta must be at most 1/2, got {delta}")
    bound = 4.0 / delta if slope_bound is None else float(slope_bound)

    interval = (_inverse(curve.p_grid, curve.f_hat, delta),
                _inverse(curve.p_grid, curve.f_hat, 1 - delta))
    derivative = _centred_derivative(curve.p_grid, curve.f_hat, bandwidth)
    cells = _q_cells(curve.p_grid, derivative, interval, bound, min_cells)
    measure = float(sum(b - a for a, b in cells))
    return QSetEstimate(interval=interval, cells=cells, measure=measure,
                        slope_bound=bound, derivative=derivative)


def q_set_from_polynomial(lc: LevelCounts, delta: float, slope_bound: Optional[float] = None,
                          points: int = 2001) -> QSetEstimate:
    """Q and I from an exact event polynomial, with the exact derivative on a fine grid"""
    delta = check_probability(delta, "delta", open_low=True, open_high=True)
    bound = 4.0 / delta if slope_bound is None else float(slope_bound)
    interval = (oracle.exact_threshold(lc, delta), oracle.exact_threshold(lc, 1 - delta))
    grid = np.linspace(0.0, 1.0, points)
    derivative = np.array([oracle.derivative(lc, float(p)) for p in grid])
    cells = _q_cells(grid, derivative, interval, bound, min_cells=1)
    measure = float(sum(b - a for a, b in cells))
    return QSetEstimate(interval=interval, cells=cells, measure=measure,
                        slope_bound=bound, derivative=derivative)


def finding_parameters_check(curve: EmpiricalCurve, delta: float, epsilon: float = 4.0,
                             bandwidth: int = DERIVATIVE_BANDWIDTH,
                             min_cells: int = MIN_Q_CELLS) -> FindingParametersReport:
    """
    If f^-1(1-delta) >= (1+epsilon) f^-1(delta), check that the part of I
    where p f'(p) <= 4/epsilon has at least half the measure of I

    Slack is one grid cell.
    """
    q_set = q_set_and_interval(curve, delta, slope_bound=4.0 / epsilon,
                               bandwidth=bandwidth, min_cells=min_cells)
    low, high = q_set.interval
    hypothesis = high >= (1 + epsilon) * low
    spacing = float(np.max(np.diff(curve.p_grid))) if curve.p_grid.size > 1 else 0.0
    return FindingParametersReport(
        epsilon=epsilon, hypothesis=bool(hypothesis), q_measure=q_set.measure,
        i_measure=q_set.interval_measure, slack=spacing,
    )


def _reparameterise(cells: List[Tuple[float, float]]) -> Callable[[float], float]:
    """Increasing phi with Leb([0, phi(x)] within X) = x Leb(X) for X the union of cells"""
    starts = np.array([a for a, _ in cells])
    lengths = np.array([b - a for a, b in cells])
    ends = np.cumsum(lengths)
    total = float(ends[-1])

    def phi(x: float) -> float:
        target = min(max(x, 0.0), 1.0) * total
        j = min(int(np.searchsorted(ends, target, side="left")), len(cells) - 1)
        before = ends[j] - lengths[j]
        return float(starts[j] + min(target - before, lengths[j]))

    return phi


def sprinkling_sequence(curve: Union[EmpiricalCurve, Callable[[float], float]],
                        q_set: Union[QSetEstimate, Sequence[Tuple[float, float]]],
                        count: int, slack: Optional[float] = None) -> SprinklingSequence:
    """
    Increasing p_0 < p_1 < ... in Q with p_{n+1} - p_n >= 3^-(n+1) Leb(Q)
    and f(p_{n+1}) - f(p_n) <= 2^-n

    Runs the trisection recursion on f o phi, where phi maps [0, 1] onto Q
    preserving relative measure. From x_n the candidates are
    x_n + i 3^-(n+1), i = 1, 2, 3; the next point is x_{n,1} when the f-gap on
    [x_{n,1}, x_{n,2}] does not exceed the one on [x_{n,2}, x_{n,3}], else x_{n,2}.

    Raises:
        InvalidParameterError: If Q is empty
        ResolutionError: If the last step falls below the numerical floor
        ContractViolationError: If a constructed term breaks either invariant
    """
    check_positive_int(count, "count")
    raw_cells = q_set.cells if isinstance(q_set, QSetEstimate) else list(q_set)
    cells = _merge_cells([(float(a), float(b)) for a, b in raw_cells if b >= a])
    if not cells:
        raise InvalidParameterError("Q must be nonempty")
    measure = float(sum(b - a for a, b in cells))

    if slack is None:
        if isinstance(curve, EmpiricalCurve) and curve.p_grid.size > 1:
            slack = float(np.max(np.diff(curve.p_grid)))
        else:
            slack = 1e-9

    if measure <= 0:
        p0 = cells[0][0]
        f0 = float(curve(p0))
        return SprinklingSequence(measure, np.full(count, p0), np.full(count, f0), slack)
    if 3.0 ** -(count - 1) * measure < SEQUENCE_FLOOR:
        raise ResolutionError(f"{count} terms need steps below {SEQUENCE_FLOOR}")

    phi = _reparameterise(cells)

    def g(x: float) -> float:
        return float(curve(phi(x)))

    x = 0.0
    xs = [x]
    for n in range(count - 1):
        h = 3.0 ** -(n + 1)
        x1, x2, x3 = x + h, x + 2 * h, min(x + 3 * h, 1.0)
        # ties (up to rounding) go to x_{n,1}
        x = x1 if g(x2) - g(x1) <= g(x3) - g(x2) + 1e-12 else x2
        xs.append(x)

    p_seq = np.array([phi(v) for v in xs])
    f_at_p = np.array([float(curve(p)) for p in p_seq])
    for n in range(count - 1):
        if p_seq[n + 1] - p_seq[n] < 3.0 ** -(n + 1) * measure - slack:
            raise ContractViolationError(f"step {n} of the sprinkling sequence is too short")
        if f_at_p[n + 1] - f_at_p[n] > 2.0 ** -n + slack:
            raise ContractViolationError(f"step {n} of the sprinkling sequence gains too much f")
    return SprinklingSequence(q_set_measure=measure, p_seq=p_seq, f_at_p=f_at_p, slack=slack)
