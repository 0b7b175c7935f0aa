"""Grid certificates: coupling inequality, Lyapunov drift and non-explosion."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import optimize

from ..config.constants import (
    COUPLING_MAX_HALVINGS,
    GRID_RATIO,
    LYAPUNOV_GRID_MAX,
    LYAPUNOV_GRID_MIN,
    LYAPUNOV_MAX_EXPONENT,
    LYAPUNOV_ROWS,
    NONEXPLOSION_FLOOR,
)
from ..core.config import get_config_manager
from ..core.errors import NumericalFailure, PreconditionError
from ..core.interfaces import CompetitionFunction, GrowthFunction, TestFunction
from ..mechanism.branching import BranchingMechanism
from ..mechanism.conditions import fluctuation_check, qsd_hypotheses_check
from .operators import apply_coupling_L_diff, apply_L
from .test_functions import CouplingPhi, GrowthScale, LyapunovF


logger = logging.getLogger(__name__)


def geometric_grid(lo: float, hi: float, ratio: float = GRID_RATIO) -> np.ndarray:
    """Points lo·ratio^k up to hi (inclusive within rounding)."""
    count = int(math.floor(math.log(hi / lo) / math.log(ratio) + 1e-9)) + 1
    return lo * ratio ** np.arange(count, dtype=float)


@dataclass(frozen=True)
class CouplingInequalityResult:
    """Outcome of the search for l with L̃Φ ≤ -C on {A < y < x < B, x - y < l}."""

    success: bool
    l: Optional[float]
    worst_margin: float
    target_C: float
    rho: float
    trace: tuple[tuple[float, float], ...] = ()
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "success": self.success,
            "l": self.l,
            "worst_margin": self.worst_margin,
            "target_C": self.target_C,
            "rho": self.rho,
            "trace": [{"l": l, "worst_margin": m} for l, m in self.trace],
            "reason": self.reason,
        }


def verify_coupling_inequality(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    rho: Optional[float],
    A: float,
    B: float,
    target_C: float,
    n_y: int = 6,
    n_d: int = 6,
) -> CouplingInequalityResult:
    """
    Search l ∈ {2^-1, ..., 2^-20} for the largest l with L̃φ_ρ(x, y) ≤ -target_C.

    The margin at a grid point is -target_C - L̃φ_ρ(x, y); the search accepts l
    when the worst margin over y ∈ (A, B - l) and x - y ∈ (0, l) is
    non-negative. The grid is evidence, not a proof.

    Args:
        mech: Branching mechanism
        g: Competition function
        rho: Exponent of φ(r) = 1 - e^{-r^ρ}; defaults to min(β, 1)/2
        A: Left end of the interval
        B: Right end of the interval
        target_C: Required negative level C ≥ 0
        n_y: Number of y grid points
        n_d: Number of dyadic offsets x - y = l·2^{-j}

    Returns:
        CouplingInequalityResult; ``success`` is False if no l works
    """
    if not 0.0 < A < B:
        raise PreconditionError(f"need 0 < A < B, got A={A}, B={B}")
    if target_C < 0:
        raise PreconditionError(f"target_C must be ≥ 0, got {target_C}")

    fluct = fluctuation_check(mech)
    if not fluct.satisfied:
        logger.info("verify_coupling_inequality: fluctuation condition fails, no search")
        return CouplingInequalityResult(
            success=False,
            l=None,
            worst_margin=-math.inf,
            target_C=target_C,
            rho=rho if rho is not None else math.nan,
            reason="fluctuation condition not satisfied",
        )
    if rho is None:
        rho = min(float(fluct.evidence_value("beta")), 1.0) / 2.0
    phi = CouplingPhi(rho)

    trace: list[tuple[float, float]] = []
    for k in range(1, COUPLING_MAX_HALVINGS + 1):
        l = 2.0**-k
        if B - l <= A:
            continue
        worst = math.inf
        for y in np.linspace(A, B - l, n_y + 2)[1:-1]:
            for j in range(n_d):
                d = l * 2.0**-j * (1.0 - 1e-6)
                value = apply_coupling_L_diff(mech, g, phi, float(y) + d, float(y))
                worst = min(worst, -target_C - value)
        trace.append((l, worst))
        logger.debug(f"coupling inequality: l={l}, worst margin {worst:.6g}")
        if worst >= 0.0:
            logger.info(f"coupling inequality holds on the grid with l={l}")
            return CouplingInequalityResult(
                success=True,
                l=l,
                worst_margin=worst,
                target_C=target_C,
                rho=rho,
                trace=tuple(trace),
            )
    return CouplingInequalityResult(
        success=False,
        l=None,
        worst_margin=max(m for _, m in trace) if trace else -math.inf,
        target_C=target_C,
        rho=rho,
        trace=tuple(trace),
        reason=f"no l down to 2^-{COUPLING_MAX_HALVINGS} satisfies the inequality",
    )


@dataclass(frozen=True)
class LyapunovRow:
    """One (n, rₙ, bₙ, Kₙ) row of a certificate with its grid margin."""

    n: int
    r_n: float
    b_n: float
    k_upper: float
    margin: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "r_n": self.r_n,
            "b_n": self.b_n,
            "K_n": [0.0, self.k_upper],
            "margin": self.margin,
        }


@dataclass(frozen=True)
class LyapunovCertificate:
    """W with sequences (rₙ), (bₙ) and Kₙ = [0, l + n - 1] checked on a grid."""

    W: LyapunovF
    l: float
    c0: float
    grid: np.ndarray = field(repr=False)
    lw: np.ndarray = field(repr=False)
    rows: tuple[LyapunovRow, ...] = ()

    def with_rates(self, factor: float) -> "LyapunovCertificate":
        """Copy with every rₙ multiplied by ``factor`` (bₙ unchanged)."""
        rows = tuple(
            LyapunovRow(r.n, r.r_n * factor, r.b_n, r.k_upper, math.nan) for r in self.rows
        )
        return LyapunovCertificate(self.W, self.l, self.c0, self.grid, self.lw, rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "W": self.W.to_dict(),
            "l": self.l,
            "C0": self.c0,
            "grid_points": int(self.grid.size),
            "rows": [row.to_dict() for row in self.rows],
        }


def _evaluate_L(
    mech: BranchingMechanism, g: CompetitionFunction, f: TestFunction, xs: np.ndarray
) -> np.ndarray:
    return np.array([apply_L(mech, g, f, float(x)) for x in xs])


def build_lyapunov(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    alpha: float,
    varphi: GrowthFunction,
    n_rows: int = LYAPUNOV_ROWS,
) -> LyapunovCertificate:
    """
    Build a Lyapunov drift certificate from W = 1 + ∫₁ˣ 1/g₀ (smoothed on [0, 1]).

    l is the smallest 2^k with LW(x) ≤ -g(x)/(2g₀(x)) on every grid x ≥ l;
    rₙ = h*(l+n-1)/(2C₀) with h = g/g₀ and h*(r) its grid infimum over x ≥ r;
    bₙ = max(2, C₀)·rₙ + sup_{Kₙ} |LW|.
    """
    report = qsd_hypotheses_check(mech, g, varphi, alpha)
    if not report.satisfied:
        raise PreconditionError(
            f"build_lyapunov needs the QSD hypotheses; check returned {report.verdict.value}"
        )
    scale = GrowthScale(alpha, varphi)
    W = LyapunovF(scale)
    c0 = W.upper_bound

    xs = geometric_grid(LYAPUNOV_GRID_MIN, LYAPUNOV_GRID_MAX)
    lw = _evaluate_L(mech, g, W, xs)
    gx = np.asarray(g(xs), dtype=float)
    g0x = np.asarray(scale(xs), dtype=float)
    ok = lw <= -gx / (2.0 * g0x)

    l: Optional[float] = None
    trace = []
    for k in range(0, LYAPUNOV_MAX_EXPONENT + 1):
        candidate = 2.0**k
        tail = xs >= candidate
        trace.append((candidate, float(np.max(lw[tail] + gx[tail] / (2.0 * g0x[tail])))))
        if np.all(ok[tail]):
            l = candidate
            break
    if l is None:
        detail = ", ".join(f"l={c:g}: excess {m:.3g}" for c, m in trace[-4:])
        raise NumericalFailure(f"build_lyapunov: no l up to 2^{LYAPUNOV_MAX_EXPONENT} ({detail})")

    h = gx / g0x
    # h*(r) as a suffix minimum over the grid
    suffix_min = np.minimum.accumulate(h[::-1])[::-1]
    wx = np.asarray(W.value(xs), dtype=float)
    rows = []
    for n in range(1, n_rows + 1):
        k_upper = l + n - 1
        idx = int(np.searchsorted(xs, k_upper, side="left"))
        if idx >= xs.size:
            break
        r_n = float(suffix_min[idx]) / (2.0 * c0)
        inside = xs <= k_upper
        b_n = max(2.0, c0) * r_n + float(np.max(np.abs(lw[inside])))
        margin = float(np.min(-lw - r_n * wx + b_n * inside))
        rows.append(LyapunovRow(n, r_n, b_n, float(k_upper), margin))
    logger.info(f"build_lyapunov: l={l}, C0={c0:.6g}, {len(rows)} rows")
    return LyapunovCertificate(W=W, l=l, c0=c0, grid=xs, lw=lw, rows=tuple(rows))


@dataclass(frozen=True)
class LyapunovVerification:
    """Per-n minimum margins on the refined grid, plus the margin table."""

    accepted: bool
    row_margins: tuple[tuple[int, float, float], ...]
    margin_rows: tuple[tuple[float, float, float, float], ...] = field(repr=False)
    offending_x: Optional[float] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "accepted": self.accepted,
            "rows": [
                {"n": n, "min_margin": m, "argmin_x": x} for n, m, x in self.row_margins
            ],
            "offending_x": self.offending_x,
        }


def verify_lyapunov(
    cert: LyapunovCertificate,
    mech: BranchingMechanism,
    g: CompetitionFunction,
    n_max: int,
) -> LyapunovVerification:
    """Re-check -LW ≥ rₙW - bₙ1_{Kₙ} on a grid twice as dense, for n ≤ n_max."""
    if n_max < 1:
        raise PreconditionError(f"n_max must be ≥ 1, got {n_max}")
    xs = geometric_grid(LYAPUNOV_GRID_MIN, LYAPUNOV_GRID_MAX, math.sqrt(GRID_RATIO))
    lhs = -_evaluate_L(mech, g, cert.W, xs)
    wx = np.asarray(cert.W.value(xs), dtype=float)

    row_margins = []
    margin_rows: list[tuple[float, float, float, float]] = []
    offending: Optional[float] = None
    for row in cert.rows[:n_max]:
        rhs = row.r_n * wx - row.b_n * (xs <= row.k_upper)
        margins = lhs - rhs
        worst = int(np.argmin(margins))
        row_margins.append((row.n, float(margins[worst]), float(xs[worst])))
        margin_rows.extend(
            (float(x), float(a), float(b), float(m)) for x, a, b, m in zip(xs, lhs, rhs, margins)
        )
        if margins[worst] < 0 and offending is None:
            offending = float(xs[worst])
            logger.warning(
                f"verify_lyapunov: row n={row.n} fails at x={offending} "
                f"(margin {margins[worst]:.6g})"
            )
    return LyapunovVerification(
        accepted=offending is None,
        row_margins=tuple(row_margins),
        margin_rows=tuple(margin_rows),
        offending_x=offending,
    )


@dataclass(frozen=True)
class NonExplosionCertificate:
    """Constants with LV ≤ C₁ + C₂V on a geometric grid."""

    success: bool
    c1: float
    c2: float
    grid: np.ndarray = field(repr=False)
    lv: np.ndarray = field(repr=False)
    margins: np.ndarray = field(repr=False)
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "success": self.success,
            "C1": self.c1,
            "C2": self.c2,
            "grid_points": int(self.grid.size),
            "min_margin": float(self.margins.min()) if self.margins.size else math.nan,
            "reason": self.reason,
        }


def verify_nonexplosion(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    V: TestFunction,
    x_max: float,
) -> NonExplosionCertificate:
    """Fit the smallest C₁ + C₂ with LV(x) ≤ C₁ + C₂V(x) over a grid up to x_max."""
    if V.bounded:
        raise PreconditionError(f"non-explosion needs V → ∞; '{V.kind}' is bounded")
    if not x_max > LYAPUNOV_GRID_MIN:
        raise PreconditionError(f"x_max must exceed {LYAPUNOV_GRID_MIN}, got {x_max}")
    xs = geometric_grid(LYAPUNOV_GRID_MIN, x_max)
    lv = _evaluate_L(mech, g, V, xs)
    vx = np.asarray(V.value(xs), dtype=float)
    empty = np.array([])

    cfg = get_config_manager().config
    ratio = np.maximum(lv, 0.0) / vx
    window = ratio[-cfg.divergence_window :]
    if window[-1] > cfg.divergence_threshold and np.all(np.diff(window) > 0):
        return NonExplosionCertificate(
            False, math.inf, math.inf, xs, lv, empty, reason="LV/V grows without bound on the grid"
        )

    fit = optimize.linprog(
        c=[1.0, 1.0],
        A_ub=np.column_stack([-np.ones_like(vx), -vx]),
        b_ub=-lv,
        bounds=[(NONEXPLOSION_FLOOR, None), (NONEXPLOSION_FLOOR, None)],
        method="highs",
    )
    if not fit.success:
        return NonExplosionCertificate(
            False, math.inf, math.inf, xs, lv, empty, reason=f"linear fit failed: {fit.message}"
        )
    c1, c2 = (float(v) for v in fit.x)
    margins = c1 + c2 * vx - lv
    logger.info(f"verify_nonexplosion: C1={c1:.6g}, C2={c2:.6g} on {xs.size} points")
    return NonExplosionCertificate(True, c1, c2, xs, lv, margins)
