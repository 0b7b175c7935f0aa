"""Test functions f (one variable) and F (two variables) fed to the generators."""

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from ..core.errors import NumericalFailure, PreconditionError
from ..core.interfaces import GrowthFunction, TestFunction
from ..mechanism.conditions import growth_scale


def _shape(x: Any, out: np.ndarray) -> Any:
    return out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class Exponential(TestFunction):
    """f(x) = e^{-λx}."""

    lam: float = 1.0

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise PreconditionError(f"Exponential needs λ > 0, got {self.lam}")

    @property
    def kind(self) -> str:
        return "exponential"

    @property
    def bounded(self) -> bool:
        return True

    def value(self, x: Any) -> Any:
        return _shape(x, np.exp(-self.lam * np.asarray(x, dtype=float)))

    def d1(self, x: Any) -> Any:
        return _shape(x, -self.lam * np.exp(-self.lam * np.asarray(x, dtype=float)))

    def d2(self, x: Any) -> Any:
        return _shape(x, self.lam**2 * np.exp(-self.lam * np.asarray(x, dtype=float)))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "lambda": self.lam}


@dataclass(frozen=True)
class CouplingPhi(TestFunction):
    """φ(r) = 1 - e^{-r^ρ}: φ(0) = 0, increasing and concave on (0, ∞)."""

    rho: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise PreconditionError(f"CouplingPhi needs ρ ∈ (0, 1), got {self.rho}")

    @property
    def kind(self) -> str:
        return "coupling_phi"

    @property
    def bounded(self) -> bool:
        return True

    def value(self, x: Any) -> Any:
        r = np.maximum(np.asarray(x, dtype=float), 0.0)
        return _shape(x, -np.expm1(-(r**self.rho)))

    def d1(self, x: Any) -> Any:
        r = np.asarray(x, dtype=float)
        rho = self.rho
        with np.errstate(divide="ignore"):
            out = np.where(r > 0, rho * r ** (rho - 1.0) * np.exp(-(r**rho)), np.inf)
        return _shape(x, out)

    def d2(self, x: Any) -> Any:
        r = np.asarray(x, dtype=float)
        rho = self.rho
        with np.errstate(divide="ignore", invalid="ignore"):
            rr = r**rho
            out = np.where(
                r > 0,
                -rho * r ** (rho - 2.0) * np.exp(-rr) * (1.0 - rho + rho * rr),
                -np.inf,
            )
        return _shape(x, out)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "rho": self.rho}


@dataclass(frozen=True)
class LogOnePlus(TestFunction):
    """V(x) = log(1 + x)."""

    @property
    def kind(self) -> str:
        return "log_one_plus"

    def value(self, x: Any) -> Any:
        return _shape(x, np.log1p(np.asarray(x, dtype=float)))

    def d1(self, x: Any) -> Any:
        return _shape(x, 1.0 / (1.0 + np.asarray(x, dtype=float)))

    def d2(self, x: Any) -> Any:
        return _shape(x, -1.0 / (1.0 + np.asarray(x, dtype=float)) ** 2)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Identity(TestFunction):
    """f(r) = r."""

    @property
    def kind(self) -> str:
        return "identity"

    def value(self, x: Any) -> Any:
        return _shape(x, np.asarray(x, dtype=float).copy())

    def d1(self, x: Any) -> Any:
        return _shape(x, np.ones_like(np.asarray(x, dtype=float)))

    def d2(self, x: Any) -> Any:
        return _shape(x, np.zeros_like(np.asarray(x, dtype=float)))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Constant(TestFunction):
    """f ≡ level."""

    level: float = 1.0

    @property
    def kind(self) -> str:
        return "constant"

    @property
    def bounded(self) -> bool:
        return True

    def value(self, x: Any) -> Any:
        return _shape(x, np.full_like(np.asarray(x, dtype=float), self.level))

    def d1(self, x: Any) -> Any:
        return _shape(x, np.zeros_like(np.asarray(x, dtype=float)))

    def d2(self, x: Any) -> Any:
        return _shape(x, np.zeros_like(np.asarray(x, dtype=float)))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "level": self.level}


@dataclass(frozen=True)
class CustomFunction(TestFunction):
    """User callables for f, f′ and f″ (scalar in, scalar out)."""

    fn: Callable[[float], float] = field(default=lambda x: 0.0)
    fn_d1: Callable[[float], float] = field(default=lambda x: 0.0)
    fn_d2: Callable[[float], float] = field(default=lambda x: 0.0)
    label: str = "custom"
    declared_bounded: bool = False

    @property
    def kind(self) -> str:
        return "custom"

    @property
    def bounded(self) -> bool:
        return self.declared_bounded

    def _apply(self, func: Callable[[float], float], x: Any) -> Any:
        if np.ndim(x):
            return np.array([func(float(v)) for v in np.asarray(x, dtype=float)])
        return float(func(float(x)))

    def value(self, x: Any) -> Any:
        return self._apply(self.fn, x)

    def d1(self, x: Any) -> Any:
        return self._apply(self.fn_d1, x)

    def d2(self, x: Any) -> Any:
        return self._apply(self.fn_d2, x)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "label": self.label}


@dataclass(frozen=True)
class GrowthScale:
    """
    Comparison function g₀ of the α-regime.

    g₀(x) = xφ(x) for α ∈ (1, 2), xφ(x)log(1+x) for α = 1 and x^{2-α}
    for α ∈ (0, 1).
    """

    alpha: float
    varphi: GrowthFunction

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 2.0:
            raise PreconditionError(f"α must lie in (0, 2), got {self.alpha}")

    def __call__(self, x: Any) -> Any:
        return _shape(x, growth_scale(self.alpha, self.varphi, np.asarray(x, dtype=float)))

    def derivative(self, x: Any) -> Any:
        r = np.asarray(x, dtype=float)
        a = self.alpha
        if a > 1.0:
            out = self.varphi(r) + r * self.varphi.derivative(r)
        elif a == 1.0:
            base = self.varphi(r) + r * self.varphi.derivative(r)
            out = base * np.log1p(r) + r * self.varphi(r) / (1.0 + r)
        else:
            out = (2.0 - a) * r ** (1.0 - a)
        return _shape(x, out)

    def to_dict(self) -> dict[str, Any]:
        return {"alpha": self.alpha, "varphi": self.varphi.to_dict()}


# Tabulation range for ∫₁ˣ 1/g₀ in u = log x
_TABLE_LOG_MAX = 200.0 * math.log(2.0)
_TABLE_NODES = 20001


@dataclass(frozen=True)
class LyapunovF(TestFunction):
    """
    W(x) = W₀ + ∫₁ˣ dy/g₀(y) on [1, ∞), extended to [0, 1] by the quadratic
    with the same value, slope and curvature at 1.

    With s = 1/g₀(1) and k = -g₀′(1)/g₀(1)², W₀ = 1 + s - k/2 makes W(0) = 1.
    On [0, 1] W′ = s + k(x - 1) ≥ s > 0 and W″ = k ≤ 0, so W ≥ 1 is
    increasing, concave and C², and bounded by C₀ = W₀ + ∫₁^∞ dy/g₀(y).
    """

    scale: GrowthScale

    @property
    def kind(self) -> str:
        return "lyapunov"

    @property
    def bounded(self) -> bool:
        return True

    @cached_property
    def _knot(self) -> tuple[float, float, float]:
        g1 = float(self.scale(1.0))
        dg1 = float(self.scale.derivative(1.0))
        if not g1 > 0:
            raise PreconditionError(f"g₀(1) must be > 0, got {g1}")
        s = 1.0 / g1
        k = -dg1 / (g1 * g1)
        return 1.0 + s - 0.5 * k, s, k

    @property
    def base_value(self) -> float:
        """W₀ = W(1)."""
        return self._knot[0]

    @cached_property
    def _table(self) -> CubicSpline:
        u = np.linspace(0.0, _TABLE_LOG_MAX, _TABLE_NODES)
        x = np.exp(u)
        integrand = x / np.asarray(self.scale(x), dtype=float)
        return CubicSpline(u, integrand).antiderivative()

    def _tail(self, x: float) -> float:
        """∫ₓ^∞ dy/g₀(y), integrated in y; g₀ = inf past the float range counts as 0."""

        def integrand(y: float) -> float:
            g = float(self.scale(y))
            return 0.0 if math.isinf(g) else 1.0 / g

        with np.errstate(over="ignore"):
            value, _ = integrate.quad(integrand, x, math.inf, limit=200)
        return float(value)

    @cached_property
    def upper_bound(self) -> float:
        """C₀ = W₀ + ∫₁^∞ dy/g₀(y)."""
        body = float(self._table(_TABLE_LOG_MAX))
        total = self.base_value + body + self._tail(math.exp(_TABLE_LOG_MAX))
        if not math.isfinite(total):
            raise NumericalFailure("∫₁^∞ 1/g₀ is not finite")
        return total

    def value(self, x: Any) -> Any:
        r = np.atleast_1d(np.asarray(x, dtype=float))
        w0, s, k = self._knot
        out = np.empty_like(r)
        low = r <= 1.0
        d = r[low] - 1.0
        out[low] = w0 + s * d + 0.5 * k * d * d
        mid = (r > 1.0) & (r <= math.exp(_TABLE_LOG_MAX))
        out[mid] = w0 + self._table(np.log(r[mid]))
        high = r > math.exp(_TABLE_LOG_MAX)
        if np.any(high):
            out[high] = [self.upper_bound - self._tail(v) for v in r[high]]
        return out if np.ndim(x) else float(out[0])

    def d1(self, x: Any) -> Any:
        r = np.atleast_1d(np.asarray(x, dtype=float))
        _, s, k = self._knot
        out = np.where(
            r <= 1.0,
            s + k * (r - 1.0),
            1.0 / np.asarray(self.scale(np.maximum(r, 1.0)), dtype=float),
        )
        return out if np.ndim(x) else float(out[0])

    def d2(self, x: Any) -> Any:
        r = np.atleast_1d(np.asarray(x, dtype=float))
        _, _, k = self._knot
        rr = np.maximum(r, 1.0)
        g0 = np.asarray(self.scale(rr), dtype=float)
        dg0 = np.asarray(self.scale.derivative(rr), dtype=float)
        out = np.where(r <= 1.0, k, -dg0 / (g0 * g0))
        return out if np.ndim(x) else float(out[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "g0": self.scale.to_dict(),
            "W0": self.base_value,
            "C0": self.upper_bound,
        }


@dataclass(frozen=True)
class PairFunction:
    """
    F(x, y) built from a one-variable f.

    ``mode`` is one of ``first`` (f(x)), ``second`` (f(y)), ``difference``
    (f(x - y)) or ``constant`` (F ≡ level).
    """

    f: Optional[TestFunction] = None
    mode: str = "constant"
    level: float = 1.0

    @classmethod
    def first(cls, f: TestFunction) -> "PairFunction":
        return cls(f=f, mode="first")

    @classmethod
    def second(cls, f: TestFunction) -> "PairFunction":
        return cls(f=f, mode="second")

    @classmethod
    def difference(cls, f: TestFunction) -> "PairFunction":
        return cls(f=f, mode="difference")

    @classmethod
    def constant(cls, level: float = 1.0) -> "PairFunction":
        return cls(mode="constant", level=level)

    def __post_init__(self) -> None:
        if self.mode not in ("first", "second", "difference", "constant"):
            raise PreconditionError(f"unknown pair mode '{self.mode}'")
        if self.mode != "constant" and self.f is None:
            raise PreconditionError(f"pair mode '{self.mode}' needs a function")

    def value(self, x: float, y: float) -> float:
        if self.mode == "constant":
            return self.level
        if self.mode == "first":
            return self.f.value(x)
        if self.mode == "second":
            return self.f.value(y)
        return self.f.value(x - y)

    def partials(self, x: float, y: float) -> tuple[float, float, float, float, float]:
        """(F_x, F_y, F_xx, F_yy, F_xy) at (x, y)."""
        if self.mode == "constant":
            return 0.0, 0.0, 0.0, 0.0, 0.0
        if self.mode == "first":
            return self.f.d1(x), 0.0, self.f.d2(x), 0.0, 0.0
        if self.mode == "second":
            return 0.0, self.f.d1(y), 0.0, self.f.d2(y), 0.0
        d1 = self.f.d1(x - y)
        d2 = self.f.d2(x - y)
        return d1, -d1, d2, d2, -d2

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"mode": self.mode}
        if self.f is not None:
            data["f"] = self.f.to_dict()
        else:
            data["level"] = self.level
        return data
