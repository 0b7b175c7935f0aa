"""Helpers shared by the experiment executors."""

from typing import Any, Optional

from ..config.constants import EXIT_OK
from ..core.models import ExperimentOutcome
from ..services.workspace import ArtifactWriter, ExperimentConfig


def build_outcome(
    name: str,
    writer: ArtifactWriter,
    message: str,
    summary: dict[str, Any],
    exit_code: int = EXIT_OK,
    details: Optional[str] = None,
) -> ExperimentOutcome:
    """Collect the artifacts written so far into an ExperimentOutcome."""
    return ExperimentOutcome(
        experiment=name,
        exit_code=exit_code,
        message=message,
        artifacts=list(writer.records),
        summary=summary,
        details=details,
    )


def model_descriptor(config: ExperimentConfig) -> dict[str, Any]:
    """Mechanism, competition and growth descriptors for JSON artifacts."""
    return {
        "mechanism": config.mechanism.to_dict(),
        "competition": config.competition.to_dict(),
        "growth": config.growth.to_dict(),
    }
