"""Abstract interfaces for cbc-lab building blocks."""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .models import ConditionReport, ExperimentOutcome


class LevyMeasure(ABC):
    """A Lévy measure μ on (0, ∞) with ∫(1 ∧ z²) μ(dz) < ∞."""

    @property
    @abstractmethod
    def kind(self) -> str:
        """Family name used in configs and reports."""
        pass

    @property
    def is_atomic(self) -> bool:
        """True if μ is a finite sum of point masses."""
        return False

    @property
    @abstractmethod
    def small_exponent(self) -> Optional[float]:
        """Exponent s with density ~ z^{-(1+s)} at 0, or None if no mass near 0."""
        pass

    @property
    @abstractmethod
    def tail_exponent(self) -> float:
        """Exponent α with density ~ z^{-(1+α)} at ∞ (``inf`` for light tails)."""
        pass

    @property
    def support_upper(self) -> float:
        """Right end of the support of μ."""
        return float("inf")

    @abstractmethod
    def density(self, z: np.ndarray) -> np.ndarray:
        """Density m(z) (zero outside the support)."""
        pass

    def atoms(self) -> list[tuple[float, float]]:
        """Point masses (z, w); empty for absolutely continuous measures."""
        return []

    @abstractmethod
    def sample_jumps(
        self, rng: np.random.Generator, eps: float, size: int
    ) -> np.ndarray:
        """Draw jump sizes from μ restricted to (eps, ∞), normalised."""
        pass

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        """Serialise to a config-style descriptor."""
        pass


class CompetitionFunction(ABC):
    """A continuous non-decreasing g with g(0) = 0."""

    @property
    @abstractmethod
    def kind(self) -> str:
        pass

    @property
    def theta(self) -> Optional[float]:
        """Declared near-zero exponent θ with liminf g(x) x^{-θ} > 0."""
        return None

    @abstractmethod
    def __call__(self, x: Any) -> Any:
        """Evaluate g (scalar or array)."""
        pass

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        pass


class GrowthFunction(ABC):
    """An increasing positive φ on [0, ∞) with ∫₁^∞ dr/(rφ(r)) < ∞."""

    @property
    @abstractmethod
    def kind(self) -> str:
        pass

    @abstractmethod
    def __call__(self, r: Any) -> Any:
        pass

    @abstractmethod
    def derivative(self, r: Any) -> Any:
        pass

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        pass


class TestFunction(ABC):
    """A C² function f on [0, ∞) with its first two derivatives."""

    __test__ = False  # keep pytest from collecting subclasses named Test*

    @property
    @abstractmethod
    def kind(self) -> str:
        pass

    @property
    def bounded(self) -> bool:
        """True if sup |f| < ∞."""
        return False

    @abstractmethod
    def value(self, x: Any) -> Any:
        pass

    @abstractmethod
    def d1(self, x: Any) -> Any:
        pass

    @abstractmethod
    def d2(self, x: Any) -> Any:
        pass

    @abstractmethod
    def to_dict(self) -> dict[str, Any]:
        pass


class ResultFormatter(ABC):
    """Abstract base class for console formatting."""

    @abstractmethod
    def format_success(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        """Format a successful result."""
        pass

    @abstractmethod
    def format_warning(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        """Format a warning result."""
        pass

    @abstractmethod
    def format_error(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        """Format an error result."""
        pass

    @abstractmethod
    def format_report(self, report: ConditionReport) -> str:
        """Format a condition report."""
        pass


class ExperimentExecutor(ABC):
    """One experiment pipeline (a CLI subcommand)."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Experiment kind."""
        pass

    @property
    def stochastic(self) -> bool:
        """True if the pipeline consumes randomness (seed mandatory)."""
        return False

    @abstractmethod
    def execute(self, config: Any, out_dir: Path) -> ExperimentOutcome:
        """Run the pipeline and write its artifacts into ``out_dir``."""
        pass
