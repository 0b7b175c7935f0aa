"""CB flow v_t(λ), Laplace transforms, extinction boundary v̄_t and extinction probabilities."""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline

from .config.constants import FLOW_NODES, LOG_COORDINATE_DECADES, ODE_ATOL, VBAR_CUTOFF
from .core.config import get_config_manager
from .core.errors import NumericalFailure, PreconditionError
from .core.models import ConditionReport, Verdict
from .mechanism.branching import BranchingMechanism
from .mechanism.conditions import grey_check


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowSolution:
    """
    Solution of ∂v/∂t = -Ψ(v), v_0 = λ, on [0, t_max].

    ``max_local_error`` is the largest embedded RK45 error estimate over the
    accepted steps, in units of v.
    """

    mechanism: BranchingMechanism
    lam: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    steps: int = 0
    evaluations: int = 0
    max_local_error: float = 0.0
    blow_up: bool = False
    log_coordinates: bool = False

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> float:
        return float(self.values[-1])

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.times, self.values, self.slopes)

    def value_at(self, t: float) -> float:
        """Dense output by cubic Hermite interpolation between solver nodes."""
        if t == 0.0:
            return self.lam
        if t < 0.0 or t > self.t_max * (1.0 + 1e-12):
            raise PreconditionError(f"t={t} outside the solved range [0, {self.t_max}]")
        idx = np.searchsorted(self.times, t)
        if idx < len(self.times) and self.times[idx] == t:
            return float(self.values[idx])
        return float(self._spline(t))

    def rows(self) -> list[tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.times, self.values)]


@dataclass(frozen=True)
class ExtinctionEntry:
    """v̄_t at one time; ``value`` is None when v̄_t is infinite."""

    t: float
    value: Optional[float]

    @property
    def finite(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class ExtinctionProfile:
    """v̄_t over a time grid."""

    mechanism: BranchingMechanism
    entries: tuple[ExtinctionEntry, ...]

    def rows(self) -> list[tuple[float, float, bool]]:
        return [
            (e.t, e.value if e.value is not None else math.inf, e.finite)
            for e in self.entries
        ]


@dataclass(frozen=True)
class _FlowRun:
    t: np.ndarray
    y: np.ndarray
    nfev: int
    failed: bool
    message: str
    max_local_error: float


def _integrate_flow(
    mech: BranchingMechanism, lam: float, t_max: float, rtol: float, log_coords: bool
) -> _FlowRun:
    """
    Step RK45 from 0 to t_max, keeping every accepted node.

    The local error of a step is the embedded fourth/fifth-order estimate,
    mapped back to the v scale in log coordinates.
    """
    if log_coords:

        def rhs(t, w):
            v = math.exp(w[0])
            return [-mech.psi(v) / v]

        y0 = [math.log(lam)]
        atol = rtol * 1e-3
    else:

        def rhs(t, v):
            return [-mech.psi(max(v[0], 0.0))]

        y0 = [lam]
        atol = ODE_ATOL
    solver = integrate.RK45(
        rhs, 0.0, y0, t_max, rtol=rtol, atol=atol, max_step=t_max / FLOW_NODES
    )
    times = [0.0]
    states = [float(y0[0])]
    worst = 0.0
    message = "reached t_max"
    while solver.status == "running":
        result = solver.step()
        if solver.status == "failed":
            message = str(result)
            break
        h = solver.t - solver.t_old
        local = abs(float(h * np.dot(solver.K.T, solver.E)[0]))
        if log_coords:
            local *= math.exp(float(solver.y[0]))
        worst = max(worst, local)
        times.append(float(solver.t))
        states.append(float(solver.y[0]))
    return _FlowRun(
        t=np.asarray(times),
        y=np.asarray([states]),
        nfev=int(solver.nfev),
        failed=solver.status == "failed",
        message=message,
        max_local_error=worst,
    )


def solve_v(
    mech: BranchingMechanism,
    lam: float,
    t_max: float,
    rtol: Optional[float] = None,
) -> FlowSolution:
    """
    Solve the flow ODE ∂v/∂t = -Ψ(v) from v_0 = λ.

    Args:
        mech: Branching mechanism
        lam: Initial value λ > 0
        t_max: Horizon > 0
        rtol: Local relative tolerance (defaults to the configured ODE tolerance)

    Returns:
        FlowSolution with dense output; ``blow_up`` is set if the solver
        stopped before t_max
    """
    if not lam > 0:
        raise PreconditionError(f"λ > 0 required, got {lam}")
    if not t_max > 0:
        raise PreconditionError(f"t_max > 0 required, got {t_max}")
    if rtol is None:
        rtol = get_config_manager().config.ode_rtol

    sol = _integrate_flow(mech, lam, t_max, rtol, log_coords=False)
    values = sol.y[0]
    log_coords = False
    positive = values[values > 0]
    if positive.size and positive.max() / positive.min() > 10.0**LOG_COORDINATE_DECADES:
        logger.debug(f"solve_v: switching to log coordinates for λ={lam}")
        sol = _integrate_flow(mech, lam, t_max, rtol, log_coords=True)
        values = np.exp(sol.y[0])
        log_coords = True

    blow_up = sol.failed
    if blow_up:
        logger.warning(f"solve_v: integration stopped at t={sol.t[-1]}: {sol.message}")
    if np.any(values <= 0):
        raise NumericalFailure(f"solve_v: flow left (0, ∞) for λ={lam}")

    times = np.asarray(sol.t, dtype=float)
    values = np.asarray(values, dtype=float).copy()
    values[0] = lam
    slopes = -mech.psi_array(values)
    return FlowSolution(
        mechanism=mech,
        lam=lam,
        times=times,
        values=values,
        slopes=slopes,
        steps=len(times) - 1,
        evaluations=int(sol.nfev),
        max_local_error=sol.max_local_error,
        blow_up=bool(blow_up),
        log_coordinates=log_coords,
    )


def flow_value(mech: BranchingMechanism, lam: float, t: float) -> float:
    """v_t(λ)."""
    if t == 0.0:
        return lam
    solution = solve_v(mech, lam, t)
    if solution.blow_up:
        raise NumericalFailure(f"flow for λ={lam} stopped before t={t}")
    return solution.final


def laplace_transform(mech: BranchingMechanism, x: float, lam: float, t: float) -> float:
    """E_x[e^{-λY_t}] = exp(-x v_t(λ)) for the CB-process."""
    if x < 0 or t < 0 or lam < 0:
        raise PreconditionError("laplace_transform needs x, λ, t ≥ 0")
    if x == 0.0 or lam == 0.0:
        return 1.0
    if t == 0.0:
        return math.exp(-x * lam)
    return math.exp(-x * flow_value(mech, lam, t))


def _tail_beyond(mech: BranchingMechanism, cutoff: float) -> float:
    """∫_Λ^∞ du/Ψ(u) with Ψ replaced by its fitted power on [Λ/2, Λ]."""
    top = mech.psi(cutoff)
    half = mech.psi(cutoff / 2.0)
    if top <= 0 or half <= 0:
        return math.inf
    p = math.log(top / half) / math.log(2.0)
    if p <= 1.0:
        return math.inf
    return cutoff / (top * (p - 1.0))


def reciprocal_tail(mech: BranchingMechanism, v: float) -> float:
    """G(v) = ∫_v^∞ du/Ψ(u)."""
    cutoff = max(VBAR_CUTOFF, 1e3 * v)

    def integrand(u: float) -> float:
        lam = math.exp(u)
        return lam / mech.psi(lam)

    body, _ = integrate.quad(integrand, math.log(v), math.log(cutoff), epsrel=1e-11, limit=200)
    return float(body) + _tail_beyond(mech, cutoff)


def vbar(
    mech: BranchingMechanism,
    t: float,
    grey: Optional[ConditionReport] = None,
) -> ExtinctionEntry:
    """Extinction boundary v̄_t = lim_{λ→∞} v_t(λ), the root of G(v) = t."""
    if not t > 0:
        raise PreconditionError(f"t > 0 required, got {t}")
    grey = grey if grey is not None else grey_check(mech)
    if grey.verdict is not Verdict.SATISFIED:
        return ExtinctionEntry(t=t, value=None)

    floor = mech.largest_root()

    def excess(log_v: float) -> float:
        return reciprocal_tail(mech, math.exp(log_v)) - t

    hi = 0.0
    while excess(hi) > 0:
        hi += 2.0
        if hi > 200:
            raise NumericalFailure(f"vbar: no upper bracket for t={t}")
    lo = hi - 2.0
    while True:
        if math.exp(lo) <= floor:
            lo = math.log(floor * (1.0 + 1e-9)) if floor > 0 else lo
            break
        if excess(lo) > 0:
            break
        lo -= 2.0
        if lo < -200:
            raise NumericalFailure(f"vbar: no lower bracket for t={t}")
    root = optimize.brentq(excess, lo, hi, xtol=1e-12, rtol=1e-12)
    return ExtinctionEntry(t=t, value=math.exp(root))


def extinction_profile(
    mech: BranchingMechanism, times: list[float]
) -> ExtinctionProfile:
    """v̄_t over ``times`` (one Grey check shared by all entries)."""
    grey = grey_check(mech)
    entries = tuple(vbar(mech, float(t), grey=grey) for t in times)
    return ExtinctionProfile(mechanism=mech, entries=entries)


def extinction_prob(mech: BranchingMechanism, x: float, t: float) -> float:
    """P_x(τ₀⁻ ≤ t) = exp(-x v̄_t) for the CB-process."""
    if x < 0:
        raise PreconditionError(f"x ≥ 0 required, got {x}")
    if x == 0.0:
        return 1.0
    entry = vbar(mech, t)
    if not entry.finite:
        raise PreconditionError("extinction_prob needs Grey's condition")
    return math.exp(-x * entry.value)
