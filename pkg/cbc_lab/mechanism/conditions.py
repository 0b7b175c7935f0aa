"""Numerical checkers for the conditions imposed on (Ψ, g)."""

import logging
import math
from typing import Optional

import numpy as np
from scipy import integrate, special

from ..config.constants import (
    GREY_CUTOFF,
    LIMIT_GRID_MAX_EXPONENT,
    PSI_SEARCH_MAX_EXPONENT,
    PSI_SEARCH_MIN_EXPONENT,
)
from ..core.config import get_config_manager
from ..core.errors import PreconditionError
from ..core.interfaces import CompetitionFunction, GrowthFunction
from ..core.models import ConditionReport, Criticality, Evidence, Verdict
from .branching import BranchingMechanism
from .competition import growth_integral


logger = logging.getLogger(__name__)


def classify_criticality(
    mech: BranchingMechanism, tol: Optional[float] = None
) -> Criticality:
    """Classify by the sign of Ψ′(0+)."""
    if tol is None:
        tol = get_config_manager().config.sign_tol
    if math.isinf(mech.mu.tail_first_moment()):
        return Criticality.UNDEFINED
    slope = mech.psi_prime0()
    if slope > tol:
        return Criticality.SUBCRITICAL
    if slope < -tol:
        return Criticality.SUPERCRITICAL
    return Criticality.CRITICAL


def stable_lower_bound(mech: BranchingMechanism, lam: float) -> float:
    """
    Lower bound of Ψ(λ) implied by μ ≥ C z^{-(1+β)} on (0, 1] with β ∈ (1, 2).

    Ψ(λ) ≥ bλ + cλ² + CΓ(-β)λ^β - Cλ/(β-1) - μ(1, ∞), where
    CΓ(-β) = CΓ(2-β)/(β(β-1)).
    """
    witness = mech.mu.lower_bound_witness()
    if witness is None or witness[1] <= 1.0:
        raise PreconditionError("stable lower bound needs a fluctuation witness with β > 1")
    C, beta = witness
    big_jumps = mech.mu.mass(1.0, math.inf)
    return (
        mech.b * lam
        + mech.c * lam * lam
        + C * special.gamma(2.0 - beta) / (beta * (beta - 1.0)) * lam**beta
        - C * lam / (beta - 1.0)
        - big_jumps
    )


def _first_positive_psi(mech: BranchingMechanism) -> Optional[float]:
    # Ψ convex with Ψ(0)=0: once positive, positive for all larger λ
    for k in range(PSI_SEARCH_MIN_EXPONENT, PSI_SEARCH_MAX_EXPONENT + 1):
        lam = 2.0**k
        if mech.psi(lam) > 0.0:
            return lam
    return None


def _reciprocal_integral(
    mech: BranchingMechanism, lo: float, hi: float
) -> tuple[float, bool]:
    def integrand(u: float) -> float:
        lam = math.exp(u)
        return lam / mech.psi(lam)

    value, error = integrate.quad(
        integrand, math.log(lo), math.log(hi), epsrel=1e-8, limit=200
    )
    return float(value), bool(error <= 1e-6 * max(1.0, abs(value)))


def grey_check(mech: BranchingMechanism, tol: Optional[float] = None) -> ConditionReport:
    """Grey's condition ∫^∞ dλ/Ψ(λ) < ∞."""
    if tol is None:
        tol = get_config_manager().config.sign_tol
    theta = _first_positive_psi(mech)
    if theta is None:
        cap = 2.0**PSI_SEARCH_MAX_EXPONENT
        return ConditionReport(
            condition="grey",
            verdict=Verdict.VIOLATED,
            evidence=(Evidence("psi_positive_search_cap", cap, "Ψ ≤ 0 on the whole search grid"),),
            tolerance=tol,
        )

    cutoff = max(GREY_CUTOFF, 1e3 * theta)
    body, body_ok = _reciprocal_integral(mech, theta, cutoff)
    evidence = [
        Evidence("theta_star", theta),
        Evidence("cutoff", cutoff),
        Evidence("body_integral", body, "∫ dλ/Ψ over [θ*, Λ]"),
        Evidence("body_converged", body_ok),
    ]

    if mech.c > 0.0:
        big = mech.mu.mass(1.0, math.inf)

        def dominant(lam: float) -> float:
            return mech.c * lam * lam + mech.b * lam - big

        tail, _ = integrate.quad(lambda lam: 1.0 / dominant(lam), cutoff, math.inf)
        evidence.append(Evidence("tail_bound", float(tail), "dominant term cλ²"))
        verdict = Verdict.SATISFIED
    else:
        s = mech.mu.small_exponent
        evidence.append(Evidence("small_exponent", s if s is not None else "none"))
        if s is None or s <= 1.0:
            # Ψ grows at most like λ log λ: the reciprocal integral diverges
            evidence.append(
                Evidence("growth_ratio", mech.psi(cutoff) / cutoff, "Ψ(Λ)/Λ")
            )
            verdict = Verdict.VIOLATED
        elif s < 1.0 + tol:
            verdict = Verdict.INCONCLUSIVE
        else:
            witness = mech.mu.lower_bound_witness()
            verdict = Verdict.SATISFIED
            if witness is not None and witness[1] > 1.0:
                lower = stable_lower_bound(mech, cutoff)
                if lower > 0:
                    tail, _ = integrate.quad(
                        lambda lam: 1.0 / stable_lower_bound(mech, lam), cutoff, math.inf
                    )
                    evidence.append(
                        Evidence("tail_bound", float(tail), "stable-type lower bound")
                    )
                else:
                    evidence.append(
                        Evidence("tail_bound", "unavailable", "lower bound not positive at Λ")
                    )
    logger.info(f"grey_check: {verdict.value} (θ*={theta}, body={body:.6g})")
    return ConditionReport("grey", verdict, tuple(evidence), tol)


def fluctuation_check(mech: BranchingMechanism) -> ConditionReport:
    """Existence of (C, β) with μ(dz) ≥ C z^{-(1+β)} dz on (0, 1]."""
    tol = get_config_manager().config.sign_tol
    witness = mech.mu.lower_bound_witness()
    if witness is None:
        return ConditionReport(
            "fluctuation",
            Verdict.VIOLATED,
            (Evidence("mu_kind", mech.mu.kind, "no power-law lower bound near 0"),),
            tol,
        )
    C, beta = witness
    return ConditionReport(
        "fluctuation",
        Verdict.SATISFIED,
        (Evidence("C", C), Evidence("beta", beta)),
        tol,
    )


def nontriviality_check(mech: BranchingMechanism) -> ConditionReport:
    """Either c > 0 or ∫₀¹ z μ(dz) = ∞."""
    tol = get_config_manager().config.sign_tol
    if mech.c > 0.0:
        return ConditionReport(
            "nontriviality", Verdict.SATISFIED, (Evidence("c", mech.c),), tol
        )
    s = mech.mu.small_exponent
    if s is not None and s >= 1.0:
        return ConditionReport(
            "nontriviality",
            Verdict.SATISFIED,
            (
                Evidence("small_exponent", s),
                Evidence("first_moment_near_zero", math.inf, "∫ z^{-s} dz diverges at 0"),
            ),
            tol,
        )
    moment = mech.mu.first_moment(0.0, 1.0)
    return ConditionReport(
        "nontriviality",
        Verdict.VIOLATED,
        (
            Evidence("small_exponent", s if s is not None else "none"),
            Evidence("first_moment_near_zero", moment),
        ),
        tol,
    )


def irreducibility_check(mech: BranchingMechanism) -> ConditionReport:
    """Nontriviality, which makes every level reachable with positive probability."""
    base = nontriviality_check(mech)
    return ConditionReport(
        "irreducibility",
        base.verdict,
        (*base.evidence, Evidence("basis", "nontriviality")),
        base.tolerance,
    )


def _liminf_at_zero(
    g: CompetitionFunction, theta: float, tol: float
) -> tuple[Verdict, list[Evidence]]:
    ks = np.arange(0, LIMIT_GRID_MAX_EXPONENT + 1)
    xs = 2.0 ** (-ks.astype(float))
    ratios = np.asarray(g(xs), dtype=float) * xs ** (-theta)
    window = ratios[-get_config_manager().config.divergence_window :]
    evidence = [
        Evidence("liminf_window_min", float(window.min())),
        Evidence("liminf_window_max", float(window.max())),
    ]
    if window.min() > tol and window.min() >= 0.5 * window.max():
        return Verdict.SATISFIED, evidence
    decreasing = bool(np.all(np.diff(window) < 0))
    if window.max() <= tol or (decreasing and window[-1] < 0.5 * window[0]):
        return Verdict.VIOLATED, evidence
    return Verdict.INCONCLUSIVE, evidence


def near_zero_check(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    theta: Optional[float] = None,
) -> ConditionReport:
    """c = 0, liminf_{x→0} g(x) x^{-θ} > 0 for some θ ∈ (0,1), and μ ≥ C z^{-2} on (0,1]."""
    tol = get_config_manager().config.sign_tol
    theta = theta if theta is not None else g.theta
    evidence: list[Evidence] = [Evidence("c", mech.c)]
    verdicts: list[Verdict] = []

    verdicts.append(Verdict.SATISFIED if mech.c == 0.0 else Verdict.VIOLATED)
    if theta is None or not 0.0 < theta < 1.0:
        evidence.append(Evidence("theta", theta if theta is not None else "none", "θ ∈ (0,1) required"))
        verdicts.append(Verdict.VIOLATED)
    else:
        evidence.append(Evidence("theta", theta))
        verdict, items = _liminf_at_zero(g, theta, tol)
        evidence.extend(items)
        verdicts.append(verdict)

    witness = mech.mu.lower_bound_witness()
    if witness is not None and witness[1] >= 1.0:
        evidence.append(Evidence("neveu_lower_bound_C", witness[0]))
        verdicts.append(Verdict.SATISFIED)
    else:
        evidence.append(Evidence("neveu_lower_bound_C", "none"))
        verdicts.append(Verdict.VIOLATED)

    if Verdict.VIOLATED in verdicts:
        overall = Verdict.VIOLATED
    elif Verdict.INCONCLUSIVE in verdicts:
        overall = Verdict.INCONCLUSIVE
    else:
        overall = Verdict.SATISFIED
    return ConditionReport("near_zero_competition", overall, tuple(evidence), tol)


def growth_scale(alpha: float, varphi: GrowthFunction, x: np.ndarray) -> np.ndarray:
    """Comparison scale for g in each α regime."""
    x = np.asarray(x, dtype=float)
    if alpha > 1.0:
        return x * varphi(x)
    if alpha == 1.0:
        return x * varphi(x) * np.log1p(x)
    return x ** (2.0 - alpha)


def _growth_limit(
    g: CompetitionFunction, alpha: float, varphi: GrowthFunction
) -> tuple[Verdict, list[Evidence]]:
    cfg = get_config_manager().config
    xs = 2.0 ** np.arange(0, LIMIT_GRID_MAX_EXPONENT + 1, dtype=float)
    ratios = np.asarray(g(xs), dtype=float) / growth_scale(alpha, varphi, xs)
    window = ratios[-cfg.divergence_window :]
    increasing = bool(np.all(np.diff(window) > 0))
    evidence = [
        Evidence("growth_ratio_last", float(ratios[-1])),
        Evidence("growth_ratio_increasing", increasing),
    ]
    if window[-1] > cfg.divergence_threshold and increasing:
        return Verdict.SATISFIED, evidence
    if window.max() <= cfg.sign_tol or bool(np.all(np.diff(window) <= 0)):
        return Verdict.VIOLATED, evidence
    return Verdict.INCONCLUSIVE, evidence


def qsd_hypotheses_check(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    varphi: GrowthFunction,
    alpha: float,
    theta: Optional[float] = None,
) -> ConditionReport:
    """Large-jump bound, α-regime growth of g, and either Grey's condition or the near-zero condition."""
    tol = get_config_manager().config.sign_tol
    if not 0.0 < alpha < 2.0:
        raise PreconditionError(f"α must lie in (0, 2), got {alpha}")
    integral = growth_integral(varphi)
    if not integral.converged or not math.isfinite(integral.value):
        raise PreconditionError(
            f"φ must satisfy ∫₁^∞ dr/(rφ(r)) < ∞ (quadrature gave {integral.value})"
        )
    evidence: list[Evidence] = [Evidence("varphi_integral", integral.value)]

    c0 = mech.mu.tail_bound_constant(alpha)
    jump_verdict = Verdict.SATISFIED if c0 is not None else Verdict.VIOLATED
    evidence.append(Evidence("large_jump_bound", jump_verdict.value))
    evidence.append(Evidence("c0", c0 if c0 is not None else "none"))

    growth_verdict, items = _growth_limit(g, alpha, varphi)
    evidence.append(Evidence("growth_limit", growth_verdict.value))
    evidence.extend(items)

    grey = grey_check(mech)
    near_zero = near_zero_check(mech, g, theta)
    evidence.append(Evidence("grey", grey.verdict.value))
    evidence.append(Evidence("near_zero_competition", near_zero.verdict.value))
    if grey.satisfied or near_zero.satisfied:
        branch_verdict = Verdict.SATISFIED
    elif grey.verdict is Verdict.VIOLATED and near_zero.verdict is Verdict.VIOLATED:
        branch_verdict = Verdict.VIOLATED
    else:
        branch_verdict = Verdict.INCONCLUSIVE

    parts = [jump_verdict, growth_verdict, branch_verdict]
    if Verdict.VIOLATED in parts:
        overall = Verdict.VIOLATED
    elif Verdict.INCONCLUSIVE in parts:
        overall = Verdict.INCONCLUSIVE
    else:
        overall = Verdict.SATISFIED
    return ConditionReport("qsd_hypotheses", overall, tuple(evidence), tol)

