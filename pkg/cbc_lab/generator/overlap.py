"""The overlap measure μ_a = [μ ∧ (δ_a * μ)]/2."""

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

from ..config.constants import ATOM_MATCH_TOL
from ..core.models import QuadratureResult
from ..mechanism.levy import MeasureBase
from ..mechanism.quadrature import integrate_positive_axis


@dataclass(frozen=True)
class OverlapMeasure:
    """μ_a for a base measure μ and a real shift a."""

    base: MeasureBase
    shift: float

    @property
    def support(self) -> tuple[float, float]:
        """Interval outside which the density vanishes."""
        a = self.shift
        return max(0.0, a), self.base.support_upper + min(a, 0.0)

    def density_at(self, z: float) -> float:
        """½ min(m(z), m(z - a)), with m = 0 on (-∞, 0]."""
        if z <= 0.0 or z - self.shift <= 0.0:
            return 0.0
        return 0.5 * min(self.base.density_at(z), self.base.density_at(z - self.shift))

    def atoms(self) -> list[tuple[float, float]]:
        """Point masses of μ_a when μ is atomic."""
        out = []
        for zi, wi in self.base.atoms():
            for zj, wj in self.base.atoms():
                if abs(zi - (zj + self.shift)) <= ATOM_MATCH_TOL:
                    out.append((zi, 0.5 * min(wi, wj)))
        return out

    @property
    def _breakpoints(self) -> tuple[float, ...]:
        a = self.shift
        return (*self.base.breakpoints, *(p + a for p in self.base.breakpoints), a, 1.0)

    def integrate(
        self, fn: Callable[[float], float], rtol: Optional[float] = None
    ) -> QuadratureResult:
        """∫ fn dμ_a."""
        if self.base.is_atomic:
            return QuadratureResult(value=float(sum(w * fn(z) for z, w in self.atoms())))
        lo, hi = self.support
        return integrate_positive_axis(
            lambda z: fn(z) * self.density_at(z),
            lo,
            hi,
            breakpoints=self._breakpoints,
            rtol=rtol,
        )

    @property
    def mass(self) -> float:
        """μ_a(0, ∞), possibly infinite."""
        closed = self.base.overlap_mass_closed(self.shift)
        if closed is not None:
            return closed
        if self.shift == 0.0:
            if self.base.infinite_activity:
                return math.inf
            return 0.5 * self.base.mass()
        return self.integrate(lambda z: 1.0).value


def overlap_mass(mu: MeasureBase, a: float) -> float:
    """Total mass of μ_a; ``inf`` for a = 0 and infinite-activity μ."""
    return OverlapMeasure(base=mu, shift=a).mass
