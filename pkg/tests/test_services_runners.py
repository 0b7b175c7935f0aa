"""Tests for cbc_lab.services.runners module."""

import math
import threading

import pytest

from cbc_lab.core.config import configure
from cbc_lab.core.models import EnsembleSummary
from cbc_lab.services.runners import block_sizes, combine_summaries, run_chunked


class TestRunners:
    """Test block-parallel execution and reduction."""

    def test_block_sizes(self):
        """Test the split into consecutive blocks."""
        assert block_sizes(10, 4) == [4, 4, 2]
        assert block_sizes(8, 4) == [4, 4]
        assert block_sizes(0, 4) == []

    def test_run_chunked_empty(self):
        """Test that no blocks run for zero items."""
        calls = []
        assert run_chunked(lambda block, size: calls.append(block), 0, chunk_size=4) == []
        assert calls == []

    def test_run_chunked_order(self):
        """Test that results come back in block order with any thread count."""

        def task(block: int, size: int) -> tuple[int, int]:
            return block, size

        serial = run_chunked(task, 10, chunk_size=4, threads=1)
        parallel = run_chunked(task, 10, chunk_size=4, threads=3)

        assert serial == [(0, 4), (1, 4), (2, 2)]
        assert parallel == serial

    def test_run_chunked_uses_threads(self):
        """Test that blocks run on worker threads when threads > 1."""
        names = set()

        def task(block: int, size: int) -> int:
            names.add(threading.current_thread().name)
            return size

        assert sum(run_chunked(task, 12, chunk_size=3, threads=2)) == 12
        assert threading.main_thread().name not in names

    def test_run_chunked_defaults_from_config(self):
        """Test the configured block size and thread count."""
        configure(paths_per_block=5, threads=1)
        sizes = run_chunked(lambda block, size: size, 12)
        assert sizes == [5, 5, 2]

    def test_combine_summaries(self):
        """Test that pooling block summaries equals summarising the pooled sample."""
        parts = [
            EnsembleSummary.from_samples("mean", [1.0, 2.0, 3.0]),
            EnsembleSummary.from_samples("mean", [4.0, 5.0]),
        ]
        pooled = combine_summaries(parts)
        direct = EnsembleSummary.from_samples("mean", [1.0, 2.0, 3.0, 4.0, 5.0])

        assert pooled.n_paths == 5
        assert pooled.value == pytest.approx(3.0)
        assert pooled.std_error == pytest.approx(direct.std_error)
        assert pooled.std_error == pytest.approx(math.sqrt(2.5) / math.sqrt(5))
        assert pooled.estimator == "mean"

    def test_combine_empty(self):
        """Test pooling with no data."""
        empty = combine_summaries([])
        assert empty.estimator == "empty"
        assert math.isnan(empty.value)

        only_empty = combine_summaries([EnsembleSummary.from_samples("p", [])])
        assert only_empty.estimator == "p"
        assert only_empty.n_paths == 0

    def test_combine_single_path(self):
        """Test a single observation has zero standard error."""
        single = combine_summaries([EnsembleSummary.from_samples("p", [0.5])])
        assert single.value == 0.5
        assert single.std_error == 0.0
