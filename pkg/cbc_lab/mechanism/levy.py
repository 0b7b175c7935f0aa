"""Lévy measure families μ on (0, ∞) and integrals against them."""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

import numpy as np
from scipy import special
from scipy.integrate import cumulative_trapezoid

from ..config.constants import ATOM_MATCH_TOL, EULER_GAMMA
from ..core.errors import NumericalFailure, PreconditionError
from ..core.interfaces import LevyMeasure
from ..core.models import QuadratureResult
from .quadrature import integrate_positive_axis


logger = logging.getLogger(__name__)


def _phi2_scalar(x: float) -> float:
    """e^{-x} - 1 + x, accurate for small x."""
    if abs(x) < 1e-3:
        return x * x * (0.5 - x / 6.0 + x * x / 24.0)
    return math.expm1(-x) + x


def _power_integral(coef: float, k: float, lo: float, hi: float) -> float:
    """∫_lo^hi coef·z^k dz for 0 <= lo < hi <= ∞ (may be infinite)."""
    if hi <= lo:
        return 0.0
    if abs(k + 1.0) < 1e-14:
        if lo == 0.0 or math.isinf(hi):
            return math.inf
        return coef * math.log(hi / lo)
    p = k + 1.0
    if p > 0:
        if math.isinf(hi):
            return math.inf
        return coef * (hi**p - lo**p) / p
    if lo == 0.0:
        return math.inf
    upper = 0.0 if math.isinf(hi) else hi**p
    return coef * (upper - lo**p) / p


class MeasureBase(LevyMeasure):
    """Integration machinery shared by every family."""

    # Decreasing densities have a closed overlap mass ½μ(|a|, ∞)
    monotone_density: bool = True

    def density_at(self, z: float) -> float:
        return float(self.density(np.array([z], dtype=float))[0])

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Kinks of the density (support edges, table knots)."""
        return (1.0,)

    def _check_finite_activity(self) -> None:
        check = self.integrate(lambda z: min(1.0, z * z))
        if not check.converged or not math.isfinite(check.value):
            raise PreconditionError(
                f"{self.kind}: ∫(1 ∧ z²) μ(dz) is not finite (got {check.value})"
            )

    def integrate(
        self,
        fn: Callable[[float], float],
        lo: float = 0.0,
        hi: float = math.inf,
        rtol: Optional[float] = None,
        extra_breakpoints: Sequence[float] = (),
    ) -> QuadratureResult:
        """Integrate ``fn`` against μ over (lo, hi]."""
        if self.is_atomic:
            total = sum(w * fn(z) for z, w in self.atoms() if lo < z <= hi)
            return QuadratureResult(value=float(total))
        upper = min(hi, self.support_upper)
        density = self.density_at
        return integrate_positive_axis(
            lambda z: fn(z) * density(z),
            lo,
            upper,
            breakpoints=(*self.breakpoints, *extra_breakpoints),
            rtol=rtol,
        )

    # Masses and moments; families override with closed forms
    def mass(self, lo: float = 0.0, hi: float = math.inf) -> float:
        if not self.is_atomic and lo == 0.0 and self.infinite_activity:
            return math.inf
        return self.integrate(lambda z: 1.0, lo, hi).value

    def first_moment(self, lo: float, hi: float) -> float:
        return self.integrate(lambda z: z, lo, hi).value

    def second_moment(self, lo: float, hi: float) -> float:
        return self.integrate(lambda z: z * z, lo, hi).value

    @property
    def infinite_activity(self) -> bool:
        s = self.small_exponent
        return s is not None and s >= 0.0

    def jump_rate(self, eps: float) -> float:
        """μ(eps, ∞)."""
        return self.mass(eps, math.inf)

    def compensator_mean(self, eps: float) -> float:
        """∫_eps^1 z μ(dz)."""
        if eps >= 1.0:
            return 0.0
        return self.first_moment(eps, 1.0)

    def small_variance(self, eps: float) -> float:
        """∫_0^eps z² μ(dz)."""
        return self.second_moment(0.0, eps)

    def tail_first_moment(self) -> float:
        """∫_{z>1} z μ(dz); infinite when the tail exponent is at most 1."""
        if self.tail_exponent <= 1.0:
            return math.inf
        return self.first_moment(1.0, math.inf)

    # Ψ jump part
    def psi_closed(self, lam: float) -> Optional[float]:
        """Closed form of ∫(e^{-λz} - 1 + λz 1_{z≤1}) μ(dz) when available."""
        return None

    def psi_jump_quadrature(
        self, lam: float, rtol: Optional[float] = None
    ) -> QuadratureResult:
        if lam == 0.0:
            return QuadratureResult(value=0.0)

        def integrand(z: float) -> float:
            if z <= 1.0:
                return _phi2_scalar(lam * z)
            return math.expm1(-lam * z)

        return self.integrate(integrand, rtol=rtol)

    def psi_jump(self, lam: float, rtol: Optional[float] = None) -> QuadratureResult:
        closed = self.psi_closed(lam)
        if closed is not None:
            return QuadratureResult(value=closed)
        return self.psi_jump_quadrature(lam, rtol=rtol)

    # Checker support
    def lower_bound_witness(self) -> Optional[tuple[float, float]]:
        """(C, β) with μ(dz) ≥ C z^{-(1+β)} dz on (0, 1], or None."""
        return None

    def tail_bound_constant(self, alpha: float) -> Optional[float]:
        """Smallest c₀ with m(z) ≤ c₀ z^{-1-α} on z > 1, or None if none exists."""
        return None

    def overlap_mass_closed(self, a: float) -> Optional[float]:
        """Total mass of [μ ∧ δ_a*μ]/2 when a closed form exists."""
        if self.is_atomic or not self.monotone_density:
            return None
        if a == 0.0:
            return math.inf if self.infinite_activity else 0.5 * self.mass()
        return 0.5 * self.mass(abs(a), math.inf)


@dataclass(frozen=True)
class PowerLawMeasure(MeasureBase):
    """Density C z^{-(1+β)} on (0, upper]."""

    C: float = 1.0
    beta: float = 1.5
    upper: float = math.inf

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise PreconditionError(f"{self.kind}: C must be > 0, got {self.C}")
        if not 0.0 < self.beta < 2.0:
            raise PreconditionError(
                f"{self.kind}: β must lie in (0, 2), got {self.beta}"
            )

    @property
    def kind(self) -> str:
        return "power_law"

    @property
    def small_exponent(self) -> Optional[float]:
        return self.beta

    @property
    def tail_exponent(self) -> float:
        return self.beta if math.isinf(self.upper) else math.inf

    @property
    def support_upper(self) -> float:
        return self.upper

    def density(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        inside = (z > 0) & (z <= self.upper)
        out[inside] = self.C * z[inside] ** (-1.0 - self.beta)
        return out

    def density_at(self, z: float) -> float:
        if z <= 0.0 or z > self.upper:
            return 0.0
        return self.C * z ** (-1.0 - self.beta)

    def _clip(self, lo: float, hi: float) -> tuple[float, float]:
        return max(lo, 0.0), min(hi, self.upper)

    def mass(self, lo: float = 0.0, hi: float = math.inf) -> float:
        lo, hi = self._clip(lo, hi)
        return _power_integral(self.C, -1.0 - self.beta, lo, hi)

    def first_moment(self, lo: float, hi: float) -> float:
        lo, hi = self._clip(lo, hi)
        return _power_integral(self.C, -self.beta, lo, hi)

    def second_moment(self, lo: float, hi: float) -> float:
        lo, hi = self._clip(lo, hi)
        return _power_integral(self.C, 1.0 - self.beta, lo, hi)

    def sample_jumps(
        self, rng: np.random.Generator, eps: float, size: int
    ) -> np.ndarray:
        u = 1.0 - rng.random(size)
        b = self.beta
        if math.isinf(self.upper):
            return eps * u ** (-1.0 / b)
        lo_term = eps ** (-b)
        hi_term = self.upper ** (-b)
        return (lo_term - (1.0 - u) * (lo_term - hi_term)) ** (-1.0 / b)

    def lower_bound_witness(self) -> Optional[tuple[float, float]]:
        return (self.C, self.beta)

    def tail_bound_constant(self, alpha: float) -> Optional[float]:
        if not math.isinf(self.upper):
            return 0.0
        if alpha > self.beta:
            return None
        return self.C

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "C": self.C, "beta": self.beta}


@dataclass(frozen=True)
class TruncatedStable(PowerLawMeasure):
    """C z^{-(1+β)} dz on (0, 1]."""

    upper: float = field(default=1.0, init=False)

    def __post_init__(self) -> None:
        super().__post_init__()
        self._check_finite_activity()

    @property
    def kind(self) -> str:
        return "truncated_stable"

    def psi_closed(self, lam: float) -> Optional[float]:
        b = self.beta
        if lam == 0.0:
            return 0.0
        if abs(b - 1.0) < 1e-3 or lam < 1e-3:
            return None
        h = _phi2_scalar(lam)
        lower_gamma = special.gamma(2.0 - b) * special.gammainc(2.0 - b, lam)
        inner = (
            -h * lam ** (-b) / b
            + (-math.expm1(-lam)) * lam ** (1.0 - b) / (b * (1.0 - b))
            - lower_gamma / (b * (1.0 - b))
        )
        return float(self.C * lam**b * inner)


@dataclass(frozen=True)
class Stable(PowerLawMeasure):
    """C z^{-(1+β)} dz on (0, ∞)."""

    upper: float = field(default=math.inf, init=False)

    def __post_init__(self) -> None:
        super().__post_init__()
        self._check_finite_activity()

    @property
    def kind(self) -> str:
        return "stable"

    def psi_closed(self, lam: float) -> Optional[float]:
        if lam == 0.0:
            return 0.0
        b = self.beta
        if abs(b - 1.0) < 1e-3:
            return None
        return float(self.C * (special.gamma(-b) * lam**b + lam / (1.0 - b)))


@dataclass(frozen=True)
class Neveu(PowerLawMeasure):
    """C z^{-2} dz on (0, ∞)."""

    beta: float = field(default=1.0, init=False)
    upper: float = field(default=math.inf, init=False)

    def __post_init__(self) -> None:
        super().__post_init__()
        self._check_finite_activity()

    @property
    def kind(self) -> str:
        return "neveu"

    def psi_closed(self, lam: float) -> Optional[float]:
        if lam == 0.0:
            return 0.0
        return float(self.C * (lam * math.log(lam) + (EULER_GAMMA - 1.0) * lam))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "C": self.C}


@dataclass(frozen=True)
class TemperedStable(MeasureBase):
    """C e^{-λ₀ z} z^{-(1+β)} dz on (0, ∞)."""

    C: float = 1.0
    beta: float = 1.5
    lambda0: float = 1.0

    def __post_init__(self) -> None:
        if not self.C > 0 or not self.lambda0 > 0:
            raise PreconditionError("tempered_stable: C and λ₀ must be > 0")
        if not 0.0 < self.beta < 2.0:
            raise PreconditionError(
                f"tempered_stable: β must lie in (0, 2), got {self.beta}"
            )
        self._check_finite_activity()

    @property
    def kind(self) -> str:
        return "tempered_stable"

    @property
    def small_exponent(self) -> Optional[float]:
        return self.beta

    @property
    def tail_exponent(self) -> float:
        return math.inf

    def density(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        pos = z > 0
        zp = z[pos]
        out[pos] = self.C * np.exp(-self.lambda0 * zp) * zp ** (-1.0 - self.beta)
        return out

    def density_at(self, z: float) -> float:
        if z <= 0.0:
            return 0.0
        return self.C * math.exp(-self.lambda0 * z) * z ** (-1.0 - self.beta)

    @cached_property
    def _tail_moment(self) -> float:
        return self.integrate(lambda z: z, 1.0, math.inf).value

    def psi_closed(self, lam: float) -> Optional[float]:
        if lam == 0.0:
            return 0.0
        b, l0 = self.beta, self.lambda0
        if abs(b - 1.0) < 1e-3 or lam < 1e-3 * l0:
            return None
        core = special.gamma(-b) * (
            (l0 + lam) ** b - l0**b - b * lam * l0 ** (b - 1.0)
        )
        return float(self.C * core - lam * self._tail_moment)

    def sample_jumps(
        self, rng: np.random.Generator, eps: float, size: int
    ) -> np.ndarray:
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            batch = max(2 * need, 16)
            z = eps * (1.0 - rng.random(batch)) ** (-1.0 / self.beta)
            keep = z[rng.random(batch) < np.exp(-self.lambda0 * (z - eps))]
            take = keep[:need]
            out[filled : filled + take.size] = take
            filled += take.size
        return out

    def lower_bound_witness(self) -> Optional[tuple[float, float]]:
        return (self.C * math.exp(-self.lambda0), self.beta)

    def tail_bound_constant(self, alpha: float) -> Optional[float]:
        gap = alpha - self.beta
        z_star = gap / self.lambda0 if gap > 0 else 0.0
        if z_star <= 1.0:
            return self.C * math.exp(-self.lambda0)
        return self.C * math.exp(-self.lambda0 * z_star) * z_star**gap

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "C": self.C,
            "beta": self.beta,
            "lambda0": self.lambda0,
        }


@dataclass(frozen=True)
class FiniteAtoms(MeasureBase):
    """Σ wᵢ δ_{zᵢ}."""

    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        for z, w in self.points:
            if not (z > 0 and w > 0):
                raise PreconditionError(
                    f"atoms: locations and weights must be > 0, got ({z}, {w})"
                )
        object.__setattr__(self, "points", tuple(sorted(self.points)))

    @property
    def kind(self) -> str:
        return "atoms"

    @property
    def is_atomic(self) -> bool:
        return True

    @property
    def small_exponent(self) -> Optional[float]:
        return None

    @property
    def tail_exponent(self) -> float:
        return math.inf

    @property
    def support_upper(self) -> float:
        return max((z for z, _ in self.points), default=0.0)

    def atoms(self) -> list[tuple[float, float]]:
        return list(self.points)

    def density(self, z: np.ndarray) -> np.ndarray:
        raise PreconditionError(f"{self.kind}: measure has no density")

    def mass(self, lo: float = 0.0, hi: float = math.inf) -> float:
        return float(sum(w for z, w in self.points if lo < z <= hi))

    def psi_closed(self, lam: float) -> Optional[float]:
        total = 0.0
        for z, w in self.points:
            total += w * (_phi2_scalar(lam * z) if z <= 1.0 else math.expm1(-lam * z))
        return total

    def sample_jumps(
        self, rng: np.random.Generator, eps: float, size: int
    ) -> np.ndarray:
        eligible = [(z, w) for z, w in self.points if z > eps]
        if not eligible:
            raise NumericalFailure(f"{self.kind}: no atoms above ε={eps}")
        locs = np.array([z for z, _ in eligible])
        weights = np.array([w for _, w in eligible])
        idx = rng.choice(len(locs), size=size, p=weights / weights.sum())
        return locs[idx]

    def lower_bound_witness(self) -> Optional[tuple[float, float]]:
        return None

    def tail_bound_constant(self, alpha: float) -> Optional[float]:
        # No density; the bound concerns absolutely continuous tails only
        return 0.0

    def overlap_mass_closed(self, a: float) -> Optional[float]:
        total = 0.0
        for zi, wi in self.points:
            for zj, wj in self.points:
                if abs(zi - (zj + a)) <= ATOM_MATCH_TOL:
                    total += min(wi, wj)
        return 0.5 * total

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "atoms": [list(p) for p in self.points]}


@dataclass(frozen=True)
class ZeroMeasure(FiniteAtoms):
    """μ = 0."""

    points: tuple[tuple[float, float], ...] = field(default=(), init=False)

    @property
    def kind(self) -> str:
        return "zero"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class TabulatedDensity(MeasureBase):
    """
    Density given on a grid, interpolated linearly in log-log coordinates.

    Below the first knot the density continues as a power law with the declared
    small-z exponent; above the last knot with the declared tail exponent.
    """

    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    small_z_exponent: float = 1.0
    tail_z_exponent: float = 1.0

    monotone_density = False

    def __post_init__(self) -> None:
        zs = np.asarray(self.grid, dtype=float)
        ms = np.asarray(self.values, dtype=float)
        if zs.size < 2 or zs.size != ms.size:
            raise PreconditionError("tabulated: need at least two (z, m) pairs")
        if np.any(zs <= 0) or np.any(np.diff(zs) <= 0):
            raise PreconditionError("tabulated: grid must be positive and strictly increasing")
        if np.any(ms <= 0):
            raise PreconditionError("tabulated: density values must be > 0")
        if not self.small_z_exponent < 2.0:
            raise PreconditionError("tabulated: small-z exponent must be < 2")
        if not self.tail_z_exponent > 0.0:
            raise PreconditionError("tabulated: tail exponent must be > 0")
        object.__setattr__(self, "grid", tuple(float(z) for z in zs))
        object.__setattr__(self, "values", tuple(float(m) for m in ms))
        self._check_finite_activity()

    @property
    def kind(self) -> str:
        return "tabulated"

    @property
    def small_exponent(self) -> Optional[float]:
        return self.small_z_exponent

    @property
    def tail_exponent(self) -> float:
        return self.tail_z_exponent

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (1.0, *self.grid)

    @cached_property
    def _log_table(self) -> tuple[np.ndarray, np.ndarray]:
        return np.log(np.asarray(self.grid)), np.log(np.asarray(self.values))

    def density(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        pos = z > 0
        lz = np.log(z[pos])
        lg, lm = self._log_table
        logm = np.interp(lz, lg, lm)
        below = lz < lg[0]
        above = lz > lg[-1]
        logm[below] = lm[0] - (1.0 + self.small_z_exponent) * (lz[below] - lg[0])
        logm[above] = lm[-1] - (1.0 + self.tail_z_exponent) * (lz[above] - lg[-1])
        out[pos] = np.exp(logm)
        return out

    def density_at(self, z: float) -> float:
        if z <= 0.0:
            return 0.0
        return float(self.density(np.array([z]))[0])

    @cached_property
    def _sampling_grid(self) -> np.ndarray:
        lo = min(self.grid[0], 1e-12) * 1e-3
        hi = self.grid[-1] * 1e12
        return np.geomspace(lo, hi, 20000)

    def sample_jumps(
        self, rng: np.random.Generator, eps: float, size: int
    ) -> np.ndarray:
        zs = self._sampling_grid
        zs = np.concatenate(([eps], zs[zs > eps]))
        # Integrate in log z: dμ = m(z) z d(log z)
        weights = self.density(zs) * zs
        cdf = cumulative_trapezoid(weights, np.log(zs), initial=0.0)
        if cdf[-1] <= 0:
            raise NumericalFailure("tabulated: no mass above ε")
        u = rng.random(size) * cdf[-1]
        return np.exp(np.interp(u, cdf, np.log(zs)))

    def lower_bound_witness(self) -> Optional[tuple[float, float]]:
        s = self.small_z_exponent
        if s <= 0:
            return None
        candidates = sorted(
            {*(round(b, 10) for b in np.linspace(0.05, 1.95, 39) if b <= s), s}
        )
        probe = np.array([z for z in self.grid if z <= 1.0] + [1.0])
        best: Optional[tuple[float, float]] = None
        for beta in candidates:
            if not 0.0 < beta < 2.0:
                continue
            # Below the first knot m(z) z^{1+β} = m₀ z₀^{1+s} z^{β-s}, minimised at z₀
            ratios = self.density(probe) * probe ** (1.0 + beta)
            inf_value = float(ratios.min())
            if inf_value > 0:
                best = (inf_value, beta)
        return best

    def tail_bound_constant(self, alpha: float) -> Optional[float]:
        if alpha > self.tail_z_exponent:
            return None
        probe = np.array([1.0] + [z for z in self.grid if z > 1.0])
        return float((self.density(probe) * probe ** (1.0 + alpha)).max())

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "grid": [[z, m] for z, m in zip(self.grid, self.values)],
            "small_exponent": self.small_z_exponent,
            "tail_exponent": self.tail_z_exponent,
        }
