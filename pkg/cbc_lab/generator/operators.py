"""The generator L of the CBC-process and the coupling generator L̃."""

import logging
import math
from collections.abc import Callable
from typing import Optional

from ..config.constants import TAYLOR_CUTOFF
from ..core.errors import DomainError, NumericalFailure, PreconditionError
from ..core.interfaces import CompetitionFunction, TestFunction
from ..core.models import QuadratureResult
from ..mechanism.branching import BranchingMechanism
from ..mechanism.competition import ZeroCompetition
from .overlap import OverlapMeasure, overlap_mass
from .test_functions import Exponential, PairFunction


logger = logging.getLogger(__name__)

L_METHODS = ("auto", "closed", "quadrature")


def _checked(result: QuadratureResult, what: str, strict: bool) -> float:
    if not math.isfinite(result.value):
        raise NumericalFailure(f"{what}: integral is not finite ({result.value})")
    if not result.converged:
        if strict:
            raise NumericalFailure(
                f"{what}: integral did not converge (value {result.value}, "
                f"error {result.error}); the test function may grow too fast"
            )
        logger.warning(f"{what}: inconclusive quadrature, partial value {result.value}")
    return result.value


def _compensated_jump(
    mech: BranchingMechanism,
    shifted: Callable[[float], float],
    centre: float,
    slope: float,
    curvature: float,
    rtol: Optional[float],
) -> QuadratureResult:
    """∫ [F(z) - F(0) - F′(0) z 1_{z≤1}] μ(dz) for F(z) = shifted(z)."""

    def integrand(z: float) -> float:
        if z < TAYLOR_CUTOFF:
            return 0.5 * curvature * z * z
        comp = slope * z if z <= 1.0 else 0.0
        return shifted(z) - centre - comp

    return mech.mu.integrate(integrand, rtol=rtol)


def apply_L(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    f: TestFunction,
    x: float,
    method: str = "auto",
    rtol: Optional[float] = None,
) -> float:
    """
    Evaluate Lf(x) = -[bx + g(x)]f′(x) + cxf″(x) + x∫[f(x+z) - f(x) - zf′(x)1_{z≤1}]μ(dz).

    Args:
        mech: Branching mechanism
        g: Competition function
        f: Test function, C² at x
        x: Evaluation point (x ≥ 0; L vanishes at 0)
        method: ``auto`` uses the closed form for Exponential, ``quadrature``
            forces the integral, ``closed`` requires a closed form
        rtol: Quadrature tolerance override

    Returns:
        Lf(x)
    """
    if method not in L_METHODS:
        raise PreconditionError(f"method must be one of {L_METHODS}, got '{method}'")
    if x < 0:
        raise DomainError(f"L is defined on [0, ∞), got x={x}")
    if x == 0.0:
        return 0.0

    if isinstance(f, Exponential) and method != "quadrature":
        lam = f.lam
        return math.exp(-lam * x) * (x * mech.psi(lam) + lam * float(g(x)))
    if method == "closed":
        raise PreconditionError(f"no closed form of L for '{f.kind}'")

    fx = float(f.value(x))
    d1 = float(f.d1(x))
    d2 = float(f.d2(x))
    local = -(mech.b * x + float(g(x))) * d1 + mech.c * x * d2
    if mech.mu.kind == "zero":
        return local
    jump = _compensated_jump(
        mech, lambda z: float(f.value(x + z)), fx, d1, d2, rtol
    )
    return local + x * _checked(jump, f"L{f.kind}({x})", strict=not f.bounded)


def apply_coupling_L(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    F: PairFunction,
    x: float,
    y: float,
    rtol: Optional[float] = None,
) -> float:
    """Evaluate the coupling generator L̃F(x, y) for x > y ≥ 0."""
    if x == y:
        raise DomainError(f"L̃ is not defined on the diagonal (x = y = {x})")
    if not x > y >= 0.0:
        raise PreconditionError(f"L̃ needs x > y ≥ 0, got x={x}, y={y}")

    fx, fy, fxx, fyy, fxy = F.partials(x, y)
    centre = F.value(x, y)
    b, c = mech.b, mech.c
    total = (
        (-b * x - float(g(x))) * fx
        + (-b * y - float(g(y))) * fy
        + c * x * fxx
        + c * y * fyy
        - 2.0 * c * y * fxy
    )
    if mech.mu.kind == "zero":
        return total

    label = f"L̃({x}, {y})"
    strict = F.f is not None and not F.f.bounded
    upper = _compensated_jump(mech, lambda z: F.value(x + z, y), centre, fx, fxx, rtol)
    total += (x - y) * _checked(upper, label, strict)
    if y == 0.0:
        return total

    common = _compensated_jump(
        mech, lambda z: F.value(x + z, y + z), centre, fx + fy, fxx + 2.0 * fxy + fyy, rtol
    )
    total += y * _checked(common, label, strict)

    a = x - y
    forward = OverlapMeasure(mech.mu, a).integrate(
        lambda z: F.value(x + z, 2.0 * y + z - x) - F.value(x + z, y + z), rtol=rtol
    )
    backward = OverlapMeasure(mech.mu, -a).integrate(
        lambda z: F.value(x + z, x + z) - F.value(x + z, y + z), rtol=rtol
    )
    total += y * (_checked(forward, label, strict) + _checked(backward, label, strict))
    return total


def apply_coupling_L_diff(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    f: TestFunction,
    x: float,
    y: float,
    rtol: Optional[float] = None,
) -> float:
    """
    L̃ on F(x, y) = f(x - y) in difference form.

    -[g(x) - g(y)]f′(r) + 4cyf″(r) + y[f(2r) - 2f(r)]μ_r(0, ∞) + L₀f(r), r = x - y,
    where L₀ is the generator without competition.
    """
    if abs(float(f.value(0.0))) > 1e-14:
        raise PreconditionError(f"difference form needs f(0) = 0, got {f.value(0.0)}")
    if x == y:
        raise DomainError(f"L̃ is not defined on the diagonal (x = y = {x})")
    if not x > y >= 0.0:
        raise PreconditionError(f"L̃ needs x > y ≥ 0, got x={x}, y={y}")

    r = x - y
    out = -(float(g(x)) - float(g(y))) * float(f.d1(r)) + 4.0 * mech.c * y * float(f.d2(r))
    if y > 0.0:
        mass = overlap_mass(mech.mu, r)
        if mass > 0.0:
            out += y * (float(f.value(2.0 * r)) - 2.0 * float(f.value(r))) * mass
    return out + apply_L(mech, ZeroCompetition(), f, r, rtol=rtol)
