"""Competition functions g and growth functions φ."""

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..core.errors import PreconditionError
from ..core.interfaces import CompetitionFunction, GrowthFunction
from ..core.models import QuadratureResult
from .quadrature import integrate_positive_axis


MONOTONE_GRID = 2.0 ** np.arange(-20.0, 21.0, 0.25)


def check_competition(g: CompetitionFunction) -> None:
    """Raise PreconditionError unless g(0)=0 and g is non-decreasing on a log grid."""
    at_zero = float(g(0.0))
    if at_zero != 0.0:
        raise PreconditionError(f"g(0) must be 0, got {at_zero}")
    values = np.asarray(g(MONOTONE_GRID), dtype=float)
    if not np.all(np.isfinite(values)):
        raise PreconditionError("g must be finite on (0, ∞)")
    drops = np.diff(values) < -1e-12 * np.maximum(1.0, np.abs(values[1:]))
    if np.any(drops):
        where = float(MONOTONE_GRID[1:][drops][0])
        raise PreconditionError(
            f"g is a continuous and non-decreasing function; sample decreases at x={where}"
        )


@dataclass(frozen=True)
class ZeroCompetition(CompetitionFunction):
    """g ≡ 0 (the pure CB-process)."""

    @property
    def kind(self) -> str:
        return "zero"

    def __call__(self, x: Any) -> Any:
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class PowerCompetition(CompetitionFunction):
    """g(x) = a·x^p."""

    a: float = 1.0
    p: float = 2.0
    declared_theta: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.p > 0):
            raise PreconditionError(f"power competition needs a, p > 0 (a={self.a}, p={self.p})")

    @property
    def kind(self) -> str:
        return "power"

    @property
    def theta(self) -> Optional[float]:
        return self.declared_theta if self.declared_theta is not None else self.p

    def __call__(self, x: Any) -> Any:
        arr = np.asarray(x, dtype=float)
        out = self.a * np.power(np.maximum(arr, 0.0), self.p)
        return out if np.ndim(x) else float(out)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "a": self.a, "p": self.p, "theta": self.theta}


@dataclass(frozen=True)
class LogisticCompetition(PowerCompetition):
    """g(x) = a·x²."""

    p: float = field(default=2.0, init=False)

    @property
    def kind(self) -> str:
        return "logistic"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "a": self.a}


@dataclass(frozen=True)
class LinearCompetition(CompetitionFunction):
    """g(x) = h·x; shifts the mechanism to Ψ(λ) + hλ."""

    h: float = 0.0

    def __post_init__(self) -> None:
        if self.h < 0:
            raise PreconditionError(f"linear competition needs h >= 0, got {self.h}")

    @property
    def kind(self) -> str:
        return "linear"

    @property
    def theta(self) -> Optional[float]:
        return 1.0 if self.h > 0 else None

    def __call__(self, x: Any) -> Any:
        arr = np.asarray(x, dtype=float)
        out = self.h * arr
        return out if np.ndim(x) else float(out)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "h": self.h}


@dataclass(frozen=True)
class CustomCompetition(CompetitionFunction):
    """A user callable with declared monotonicity."""

    fn: Callable[[Any], Any] = field(default=lambda x: 0.0 * np.asarray(x))
    declared_monotone: bool = True
    declared_theta: Optional[float] = None
    label: str = "custom"

    def __post_init__(self) -> None:
        if not self.declared_monotone:
            raise PreconditionError("custom competition must be declared non-decreasing")
        check_competition(self)

    @property
    def kind(self) -> str:
        return "custom"

    @property
    def theta(self) -> Optional[float]:
        return self.declared_theta

    def __call__(self, x: Any) -> Any:
        out = self.fn(np.asarray(x, dtype=float))
        return np.asarray(out, dtype=float) if np.ndim(x) else float(out)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "label": self.label, "theta": self.theta}


@dataclass(frozen=True)
class LogPowerGrowth(GrowthFunction):
    """φ(r) = (log(1+r))^p."""

    p: float = 2.0

    @property
    def kind(self) -> str:
        return "log_power"

    def __call__(self, r: Any) -> Any:
        return np.log1p(np.asarray(r, dtype=float)) ** self.p

    def derivative(self, r: Any) -> Any:
        r = np.asarray(r, dtype=float)
        return self.p * np.log1p(r) ** (self.p - 1.0) / (1.0 + r)

    @property
    def integrable(self) -> bool:
        return self.p > 1.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class PowerGrowth(GrowthFunction):
    """φ(r) = (1+r)^q."""

    q: float = 0.5

    @property
    def kind(self) -> str:
        return "power"

    def __call__(self, r: Any) -> Any:
        return (1.0 + np.asarray(r, dtype=float)) ** self.q

    def derivative(self, r: Any) -> Any:
        return self.q * (1.0 + np.asarray(r, dtype=float)) ** (self.q - 1.0)

    @property
    def integrable(self) -> bool:
        return self.q > 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "q": self.q}


def growth_integral(varphi: GrowthFunction) -> QuadratureResult:
    """∫₁^∞ dr/(r φ(r)), integrated in u = log r."""
    integrable = getattr(varphi, "integrable", None)
    if integrable is False:
        return QuadratureResult(value=math.inf, converged=False)
    return integrate_positive_axis(
        lambda u: 1.0 / float(varphi(math.exp(u))), 0.0, math.inf
    )
