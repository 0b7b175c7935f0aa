"""Branching mechanisms Ψ(λ) = bλ + cλ² + ∫(e^{-λz} - 1 + λz 1_{z≤1}) μ(dz)."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import optimize

from ..core.config import get_config_manager
from ..core.errors import NumericalFailure, PreconditionError
from ..core.models import QuadratureResult
from .levy import MeasureBase, ZeroMeasure


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BranchingMechanism:
    """The triple (b, c, μ)."""

    b: float = 0.0
    c: float = 0.0
    mu: MeasureBase = field(default_factory=ZeroMeasure)

    def __post_init__(self) -> None:
        if not self.c >= 0.0:
            raise PreconditionError(f"c ≥ 0 required, got c={self.c}")
        if not math.isfinite(self.b):
            raise PreconditionError(f"b must be finite, got {self.b}")

    def psi_detailed(self, lam: float, rtol: Optional[float] = None) -> QuadratureResult:
        """Ψ(λ) with quadrature diagnostics for the jump part."""
        if lam < 0:
            raise PreconditionError(f"Ψ is evaluated on λ ≥ 0, got {lam}")
        if lam == 0.0:
            return QuadratureResult(value=0.0)
        jump = self.mu.psi_jump(lam, rtol=rtol)
        return QuadratureResult(
            value=self.b * lam + self.c * lam * lam + jump.value,
            error=jump.error,
            converged=jump.converged,
            evaluations=jump.evaluations,
        )

    def psi(self, lam: float, rtol: Optional[float] = None) -> float:
        result = self.psi_detailed(lam, rtol=rtol)
        if not result.converged:
            logger.warning(
                f"inconclusive quadrature for Ψ({lam}): partial value {result.value} "
                f"(error estimate {result.error})"
            )
        return result.value

    def psi_array(self, lams: Any) -> np.ndarray:
        return np.array([self.psi(float(lam)) for lam in np.atleast_1d(lams)])

    def psi_prime0(self) -> float:
        """Ψ′(0+) = b - ∫_{z>1} z μ(dz) (``-inf`` for an infinite-mean tail)."""
        tail = self.mu.tail_first_moment()
        if math.isinf(tail):
            return -math.inf
        return self.b - tail

    def with_linear_competition(self, h: float) -> "BranchingMechanism":
        """Mechanism Ψ(λ) + hλ of the process with competition g(x) = h·x."""
        if h < 0:
            raise PreconditionError(f"h ≥ 0 required, got {h}")
        return BranchingMechanism(b=self.b + h, c=self.c, mu=self.mu)

    def convexity_violations(
        self, grid: Optional[np.ndarray] = None, scale_tol: float = 1e-7
    ) -> list[float]:
        """Grid points where a second difference of Ψ is negative beyond tolerance."""
        lams = grid if grid is not None else np.geomspace(1e-3, 1e3, 25)
        values = self.psi_array(lams)
        bad = []
        for i in range(1, len(lams) - 1):
            l1, l2, l3 = lams[i - 1], lams[i], lams[i + 1]
            w = (l3 - l2) / (l3 - l1)
            chord = w * values[i - 1] + (1.0 - w) * values[i + 1]
            scale = max(1.0, abs(values[i - 1]), abs(values[i + 1]))
            if values[i] > chord + scale_tol * scale:
                bad.append(float(l2))
        return bad

    def largest_root(self, cap: float = 2.0**60) -> float:
        """Largest λ ≥ 0 with Ψ(λ) = 0 (0 unless the mechanism is supercritical)."""
        tol = get_config_manager().config.sign_tol
        if self.psi_prime0() >= -tol:
            return 0.0
        lam = 1e-6
        while self.psi(lam) <= 0.0:
            lam *= 2.0
            if lam > cap:
                raise NumericalFailure(f"Ψ stays non-positive up to λ={cap}")
        lo = lam / 2.0 if lam > 1e-6 else 0.0
        if lo == 0.0:
            return 0.0
        return float(optimize.brentq(self.psi, lo, lam, xtol=1e-14, rtol=1e-12))

    def to_dict(self) -> dict[str, Any]:
        return {"b": self.b, "c": self.c, "mu": self.mu.to_dict()}


def psi_eval(
    mech: BranchingMechanism,
    lam: float,
    rtol: Optional[float] = None,
    strict: bool = False,
) -> float:
    """
    Evaluate Ψ(λ).

    Args:
        mech: Branching mechanism
        lam: Argument λ ≥ 0
        rtol: Quadrature tolerance override
        strict: Raise NumericalFailure instead of warning on non-convergence

    Returns:
        Ψ(λ)
    """
    result = mech.psi_detailed(lam, rtol=rtol)
    if not result.converged:
        if strict:
            raise NumericalFailure(
                f"inconclusive quadrature for Ψ({lam}); partial value {result.value}"
            )
        logger.warning(f"inconclusive quadrature for Ψ({lam}); partial value {result.value}")
    return result.value


def feller(c: float = 1.0, b: float = 0.0) -> BranchingMechanism:
    """Diffusion-only mechanism Ψ(λ) = bλ + cλ²."""
    return BranchingMechanism(b=b, c=c, mu=ZeroMeasure())
