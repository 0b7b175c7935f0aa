"""Experiment orchestration: dispatch, timeout, error mapping and the run manifest."""

import asyncio
import logging
import time
from pathlib import Path
from typing import Optional

from ..config.constants import EXIT_CONFIG, EXIT_NUMERIC, EXIT_TIMEOUT
from ..core.config import get_config_manager
from ..core.errors import CbcLabError
from ..core.models import ExperimentOutcome
from ..executors.factories import ExecutorFactory
from .workspace import ExperimentConfig, collect_artifacts, write_manifest


logger = logging.getLogger(__name__)


class ExperimentOrchestrator:
    """Runs one experiment through the executor registered for its kind."""

    def __init__(self):
        self._factory = ExecutorFactory()
        self._config_manager = get_config_manager()

    async def run(
        self,
        config: ExperimentConfig,
        out_dir: Optional[Path] = None,
        timeout: Optional[float] = None,
    ) -> ExperimentOutcome:
        """
        Execute the configured experiment and write its manifest.

        Args:
            config: Validated experiment configuration
            out_dir: Artifact directory (defaults to ``config.output``)
            timeout: Seconds before the run counts as timed out (defaults to
                LabConfig.timeout); the manifest still waits for the worker to stop

        Returns:
            ExperimentOutcome whose exit code is 0, 1, 2, 3 or 124
        """
        out = Path(out_dir or config.output)
        timeout = timeout or self._config_manager.config.timeout
        logger.info(
            f"Orchestrating {config.experiment}: out_dir={out}, seed={config.seed}, threads={config.threads}"
        )
        for warning in config.warnings:
            logger.warning(f"{config.experiment}: {warning}")

        executor = self._factory.create_executor(config.experiment)
        if not executor:
            supported = ", ".join(self._factory.get_supported_experiments())
            return ExperimentOutcome(
                experiment=config.experiment,
                exit_code=EXIT_CONFIG,
                message=f"unknown experiment '{config.experiment}'",
                details=f"Supported experiments: {supported}",
            )

        out.mkdir(parents=True, exist_ok=True)
        self._config_manager.update_config(threads=config.threads)
        start = time.perf_counter()
        worker = asyncio.ensure_future(asyncio.to_thread(executor.execute, config, out))
        try:
            outcome = await asyncio.wait_for(asyncio.shield(worker), timeout=timeout)
        except asyncio.TimeoutError:
            logger.error(f"{config.experiment} timed out after {timeout:g}s; waiting for the worker to stop")
            await _settle(worker)
            outcome = ExperimentOutcome(
                experiment=config.experiment,
                exit_code=EXIT_TIMEOUT,
                message=f"timed out after {timeout:g}s",
                artifacts=collect_artifacts(out),
            )
        except CbcLabError as e:
            logger.error(f"{config.experiment} failed: {type(e).__name__}: {e}")
            outcome = ExperimentOutcome(
                experiment=config.experiment,
                exit_code=e.exit_code,
                message=f"{type(e).__name__}: {e}",
                artifacts=collect_artifacts(out),
            )
        except Exception as e:
            logger.error(f"{config.experiment} failed unexpectedly: {e}", exc_info=True)
            outcome = ExperimentOutcome(
                experiment=config.experiment,
                exit_code=EXIT_NUMERIC,
                message=f"unexpected failure: {e}",
                artifacts=collect_artifacts(out),
            )
        wall_time = time.perf_counter() - start

        manifest = write_manifest(out, config, outcome.artifacts, wall_time, outcome.exit_code)
        logger.info(
            f"{config.experiment} finished with exit code {outcome.exit_code} in {wall_time:.2f}s "
            f"({len(outcome.artifacts)} artifacts, manifest {manifest})"
        )
        return outcome

    def render(self, outcome: ExperimentOutcome) -> str:
        """Format an outcome with the configured formatter."""
        if not outcome.success:
            return self._format_error(outcome.experiment, outcome.message, outcome.details)
        warnings = outcome.summary.get("warnings")
        if warnings:
            details = "\n".join(str(w) for w in warnings)
            if outcome.details:
                details = f"{outcome.details}\n{details}"
            return self._format_warning(outcome.experiment, outcome.message, details)
        return self._format_success(outcome.experiment, outcome.message, outcome.details)

    def _format_success(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        """Format success result."""
        formatter = self._config_manager.get_formatter()
        return formatter.format_success(name, message, details)

    def _format_warning(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        """Format warning result."""
        formatter = self._config_manager.get_formatter()
        return formatter.format_warning(name, message, details)

    def _format_error(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        """Format error result."""
        formatter = self._config_manager.get_formatter()
        return formatter.format_error(name, message, details)


async def _settle(worker: "asyncio.Future[ExperimentOutcome]") -> None:
    """Wait until a timed-out worker thread returns; threads cannot be cancelled."""
    try:
        await worker
    except Exception as e:
        logger.debug(f"timed-out worker ended with {type(e).__name__}: {e}")
    else:
        logger.debug("timed-out worker finished")


def run_experiment(
    config: ExperimentConfig,
    out_dir: Optional[Path] = None,
    timeout: Optional[float] = None,
) -> ExperimentOutcome:
    """Synchronous wrapper around ExperimentOrchestrator.run."""
    return asyncio.run(ExperimentOrchestrator().run(config, out_dir, timeout))
