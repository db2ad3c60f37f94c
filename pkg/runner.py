"""
Replica-parallel execution

Replica tasks are pure functions of their index; results come back in index
order so every aggregate is independent of the thread count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Set once by the CLI from --threads / LabConfig
DEFAULT_THREADS = 1
SHOW_PROGRESS = False


def configure(threads: Optional[int] = None, progress: Optional[bool] = None):
    """Set process-wide defaults for replica parallelism"""
    global DEFAULT_THREADS, SHOW_PROGRESS
    if threads is not None:
        DEFAULT_THREADS = max(1, int(threads))
    if progress is not None:
        SHOW_PROGRESS = bool(progress)


def run_replicas(task: Callable[[int], T],
                 count: int,
                 threads: Optional[int] = None,
                 desc: str = "replicas",
                 start: int = 0) -> List[T]:
    """
    Evaluate task(i) for i in [start, start + count)

    Args:
        task: Replica function; must not share mutable state across calls
        count: Number of replicas
        threads: Worker count (defaults to the configured value)
        desc: Progress-bar label
        start: First replica index

    Returns:
        Results ordered by replica index
    """
    threads = DEFAULT_THREADS if threads is None else max(1, int(threads))
    indices = range(start, start + count)

    # Try to import tqdm, fall back to plain iteration if not available
    progress = None
    if SHOW_PROGRESS:
        try:
            from tqdm import tqdm
            progress = tqdm(total=count, desc=desc)
        except ImportError:
            logger.warning("tqdm not installed. Install it for progress bars: pip install tqdm")

    def tracked(i: int) -> T:
        result = task(i)
        if progress is not None:
            progress.update(1)
        return result

    try:
        if threads > 1 and count > 1:
            logger.debug(f"Running {count} {desc} with {threads} workers")
            with ThreadPoolExecutor(max_workers=threads) as executor:
                return list(executor.map(tracked, indices))
        return [tracked(i) for i in indices]
    finally:
        if progress is not None:
            progress.close()
