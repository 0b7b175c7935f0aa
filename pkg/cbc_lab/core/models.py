"""Core data models shared across cbc-lab modules."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

import numpy as np


class Verdict(Enum):
    """Outcome of a numerical condition check."""

    SATISFIED = "satisfied"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


class Criticality(Enum):
    """Sign classification of Ψ′(0+)."""

    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"
    UNDEFINED = "supercritical-or-undefined"


EvidenceValue = Union[float, int, str, bool, None]


@dataclass(frozen=True)
class Evidence:
    """A labelled numeric (or textual) observation backing a verdict."""

    label: str
    value: EvidenceValue
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        value = self.value
        if isinstance(value, float) and not math.isfinite(value):
            value = str(value)
        data: dict[str, Any] = {"label": self.label, "value": value}
        if self.note:
            data["note"] = self.note
        return data


@dataclass(frozen=True)
class ConditionReport:
    """Verdict on one named condition together with its evidence."""

    condition: str
    verdict: Verdict
    evidence: tuple[Evidence, ...] = ()
    tolerance: float = 0.0

    @property
    def satisfied(self) -> bool:
        return self.verdict is Verdict.SATISFIED

    def evidence_value(self, label: str) -> EvidenceValue:
        """Return the value recorded under ``label`` (KeyError if absent)."""
        for item in self.evidence:
            if item.label == label:
                return item.value
        raise KeyError(label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "verdict": self.verdict.value,
            "evidence": [item.to_dict() for item in self.evidence],
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class QuadratureResult:
    """Value of an integral with its error estimate and convergence flag."""

    value: float
    error: float = 0.0
    converged: bool = True
    evaluations: int = 0

    def __add__(self, other: "QuadratureResult") -> "QuadratureResult":
        return QuadratureResult(
            value=self.value + other.value,
            error=self.error + other.error,
            converged=self.converged and other.converged,
            evaluations=self.evaluations + other.evaluations,
        )


@dataclass(frozen=True)
class EnsembleSummary:
    """Monte Carlo estimate over an ensemble of paths."""

    estimator: str
    n_paths: int
    value: float
    std_error: float

    @classmethod
    def from_samples(cls, estimator: str, samples: Any) -> "EnsembleSummary":
        data = np.asarray(samples, dtype=float)
        n = int(data.size)
        if n == 0:
            return cls(estimator=estimator, n_paths=0, value=math.nan, std_error=math.nan)
        std = float(data.std(ddof=1)) if n > 1 else 0.0
        return cls(
            estimator=estimator,
            n_paths=n,
            value=float(data.mean()),
            std_error=std / math.sqrt(n),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_paths": self.n_paths,
            "estimator": self.estimator,
            "value": self.value,
            "std_error": self.std_error,
        }


@dataclass(frozen=True)
class ArtifactRecord:
    """A file written by an experiment, with its content hash."""

    path: str
    sha256: str


@dataclass
class ExperimentOutcome:
    """Result of running one experiment pipeline."""

    experiment: str
    exit_code: int
    message: str
    artifacts: list[ArtifactRecord] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    details: Optional[str] = None

    @property
    def success(self) -> bool:
        """True if the experiment completed with exit code 0."""
        return self.exit_code == 0
