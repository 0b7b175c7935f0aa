"""Block-parallel execution of Monte Carlo work with deterministic reduction."""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, TypeVar

from ..core.config import get_config_manager
from ..core.models import EnsembleSummary


logger = logging.getLogger(__name__)

T = TypeVar("T")


def block_sizes(n_items: int, chunk_size: int) -> list[int]:
    """Sizes of the consecutive blocks covering ``n_items``."""
    if n_items <= 0:
        return []
    full, rest = divmod(n_items, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunked(
    task: Callable[[int, int], T],
    n_items: int,
    chunk_size: Optional[int] = None,
    threads: Optional[int] = None,
) -> list[T]:
    """
    Run ``task(block_index, block_size)`` over consecutive blocks of items.

    Args:
        task: Work for one block; must draw randomness only from its block index
        n_items: Total number of items (paths, particles)
        chunk_size: Items per block (defaults to the configured block size)
        threads: Worker threads (defaults to the configured thread count)

    Returns:
        Block results in block order, independent of the thread count
    """
    cfg = get_config_manager().config
    chunk_size = chunk_size or cfg.paths_per_block
    threads = threads or cfg.threads
    sizes = block_sizes(n_items, chunk_size)
    if not sizes:
        return []

    logger.debug(f"running {len(sizes)} blocks of up to {chunk_size} items on {threads} threads")
    if threads <= 1 or len(sizes) == 1:
        return [task(k, size) for k, size in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(len(sizes)), sizes))


def combine_summaries(summaries: list[EnsembleSummary]) -> EnsembleSummary:
    """
    Pool per-block estimates into one.

    Args:
        summaries: Block summaries of the same estimator

    Returns:
        Summary of the pooled sample (mean and standard error)
    """
    parts = [s for s in summaries if s.n_paths > 0]
    if not parts:
        name = summaries[0].estimator if summaries else "empty"
        return EnsembleSummary(estimator=name, n_paths=0, value=math.nan, std_error=math.nan)

    total = sum(s.n_paths for s in parts)
    mean = sum(s.n_paths * s.value for s in parts) / total
    if total < 2:
        return EnsembleSummary(parts[0].estimator, total, mean, 0.0)
    # Within-block sums of squares from n·SE², plus between-block spread
    squares = sum(
        (s.n_paths - 1) * (s.std_error**2 * s.n_paths) + s.n_paths * (s.value - mean) ** 2
        for s in parts
    )
    variance = squares / (total - 1)
    return EnsembleSummary(
        estimator=parts[0].estimator,
        n_paths=total,
        value=mean,
        std_error=math.sqrt(variance / total),
    )
