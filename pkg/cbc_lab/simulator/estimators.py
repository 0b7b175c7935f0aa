"""Monte Carlo estimators on simulated ensembles."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
from scipy import stats

from ..cbflow import laplace_transform
from ..config.constants import WILSON_CONFIDENCE
from ..core.errors import PreconditionError
from ..core.interfaces import CompetitionFunction
from ..core.models import EnsembleSummary
from ..mechanism.branching import BranchingMechanism
from ..mechanism.competition import ZeroCompetition
from .config import SimConfig
from .paths import simulate_ensemble, with_horizon


logger = logging.getLogger(__name__)

PASSAGE_KINDS = ("down", "up", "exact")


def wilson_interval(
    successes: int, n: int, confidence: float = WILSON_CONFIDENCE
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(ci.low), float(ci.high)


def _z_score(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


@dataclass(frozen=True)
class HittingDistribution:
    """
    Per-path first passage times of one level, censored at the horizon.

    ``down`` is the first time Y ≤ level, ``up`` the first time Y ≥ level
    (jumps over the level count) and ``exact`` the first time a continuous
    stretch of the path meets the level. Censored entries are ``inf``.
    """

    level: float
    x0: float
    horizon: float
    down: np.ndarray = field(repr=False)
    up: np.ndarray = field(repr=False)
    exact: np.ndarray = field(repr=False)

    @property
    def n_paths(self) -> int:
        return int(self.down.size)

    def times(self, kind: str = "down") -> np.ndarray:
        if kind not in PASSAGE_KINDS:
            raise PreconditionError(f"unknown passage kind {kind!r}; use one of {PASSAGE_KINDS}")
        return getattr(self, kind)

    def censored(self, kind: str = "down") -> np.ndarray:
        return np.isinf(self.times(kind))

    def probability_by(self, t: Optional[float] = None, kind: str = "down") -> EnsembleSummary:
        """Estimate of P(τ ≤ t); ``t`` defaults to the horizon."""
        t = self.horizon if t is None else t
        return EnsembleSummary.from_samples(f"P(tau_{kind} <= {t:g})", self.times(kind) <= t)

    def frequency(self, t: Optional[float] = None, kind: str = "down") -> tuple[int, int]:
        t = self.horizon if t is None else t
        return int(np.sum(self.times(kind) <= t)), self.n_paths

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"level": self.level, "x0": self.x0, "horizon": self.horizon}
        for kind in PASSAGE_KINDS:
            k, n = self.frequency(kind=kind)
            data[kind] = {
                "summary": self.probability_by(kind=kind).to_dict(),
                "censored_fraction": 1.0 - k / n,
                "wilson": list(wilson_interval(k, n)),
            }
        return data


def hitting_time(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    x0: float,
    level: float,
    cfg: SimConfig,
    n_paths: int,
    threads: Optional[int] = None,
) -> HittingDistribution:
    """
    Empirical first passage times of ``level`` from x0.

    Args:
        mech: Branching mechanism
        g: Competition function
        x0: Initial state > 0
        level: Level ≥ 0 (0 gives the extinction time)
        cfg: Simulation settings; the horizon is the censoring time
        n_paths: Number of paths
        threads: Worker threads for the ensemble

    Returns:
        HittingDistribution with down/up/exact passage times
    """
    if level < 0:
        raise PreconditionError(f"level must be ≥ 0, got {level}")
    result = simulate_ensemble(mech, g, x0, cfg, n_paths, levels=(level,), threads=threads)
    dist = HittingDistribution(
        level=float(level),
        x0=float(x0),
        horizon=cfg.horizon,
        down=result.passage("down", level),
        up=result.passage("up", level),
        exact=result.passage("exact", level),
    )
    logger.info(
        f"hitting_time: level {level:g} from {x0:g}, "
        f"P(down by T)={dist.probability_by().value:.4g} over {n_paths} paths"
    )
    return dist


@dataclass(frozen=True)
class ExitScan:
    """Exit probabilities of (A, B) from starts inside (A', B') and a C·√t fit."""

    interval: tuple[float, float]
    inner: tuple[float, float]
    starts: np.ndarray = field(repr=False)
    t_grid: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    c_hat: float = math.nan
    r2: float = math.nan

    @property
    def sup_probabilities(self) -> np.ndarray:
        return self.probabilities.max(axis=0)

    @property
    def ratios(self) -> np.ndarray:
        return self.sup_probabilities / np.sqrt(self.t_grid)

    @property
    def ratio_spread(self) -> float:
        """max/min of the positive ratios P̂(t)/√t (nan without two positive ones)."""
        positive = self.ratios[self.ratios > 0]
        if positive.size < 2:
            return math.nan
        return float(positive.max() / positive.min())

    def rows(self) -> list[tuple[float, float, float]]:
        return [
            (float(t), float(p), float(r))
            for t, p, r in zip(self.t_grid, self.sup_probabilities, self.ratios)
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "interval": list(self.interval),
            "inner": list(self.inner),
            "t": self.t_grid.tolist(),
            "sup_probability": self.sup_probabilities.tolist(),
            "C_hat": self.c_hat,
            "r2": self.r2,
            "ratio_spread": self.ratio_spread,
        }


def _fit_sqrt_envelope(t: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    """Least squares fit of p ≈ C·√t through the origin; returns (C, R²)."""
    c_hat = float(np.dot(p, np.sqrt(t)) / np.sum(t))
    spread = float(np.sum((p - p.mean()) ** 2))
    if spread == 0.0:
        return c_hat, math.nan
    residual = float(np.sum((p - c_hat * np.sqrt(t)) ** 2))
    return c_hat, 1.0 - residual / spread


def exit_probability_scan(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    interval: tuple[float, float],
    inner: tuple[float, float],
    t_grid: list[float],
    n_paths: int,
    cfg: SimConfig,
    n_starts: int = 5,
    threads: Optional[int] = None,
) -> ExitScan:
    """
    Scan sup over y ∈ (A', B') of P_y(S ≤ t), S being the exit time of (A, B).

    Each start point uses its own stream (cfg.stream + index) and the
    horizon max(t_grid).
    """
    a, b = interval
    a_in, b_in = inner
    if not 0 < a < a_in < b_in < b:
        raise PreconditionError(f"need 0 < A < A' < B' < B, got {interval} and {inner}")
    times = np.asarray(sorted(t_grid), dtype=float)
    if times.size == 0 or times[0] <= 0:
        raise PreconditionError("t grid must be non-empty and positive")
    starts = np.linspace(a_in, b_in, n_starts)
    probabilities = np.empty((starts.size, times.size))

    for i, y in enumerate(starts):
        run_cfg = with_horizon(cfg, float(times[-1]), stream=cfg.stream + i)
        result = simulate_ensemble(
            mech, g, float(y), run_cfg, n_paths, levels=(a, b), threads=threads
        )
        exit_time = np.minimum(result.passage("down", a), result.passage("up", b))
        probabilities[i] = [(exit_time <= t).mean() for t in times]

    sup = probabilities.max(axis=0)
    c_hat, r2 = _fit_sqrt_envelope(times, sup)
    logger.info(f"exit_probability_scan: C_hat={c_hat:.4g}, R²={r2:.3g}")
    return ExitScan(
        interval=(float(a), float(b)),
        inner=(float(a_in), float(b_in)),
        starts=starts,
        t_grid=times,
        probabilities=probabilities,
        c_hat=c_hat,
        r2=r2,
    )


@dataclass(frozen=True)
class LaplaceCheck:
    """Monte Carlo mean of exp(-λ Y_t) against exp(-x v_t(λ))."""

    x0: float
    lam: float
    t: float
    mc: EnsembleSummary
    analytic: float
    z_score: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "x0": self.x0,
            "lambda": self.lam,
            "t": self.t,
            "mc": self.mc.to_dict(),
            "analytic": self.analytic,
            "z_score": self.z_score,
        }


def _require_pure_branching(g: CompetitionFunction) -> None:
    if g.kind != "zero":
        raise PreconditionError(
            f"the Laplace identity only holds without competition; got g of kind {g.kind!r}"
        )


def _laplace_summary(
    mech: BranchingMechanism, x0: float, lam: float, cfg: SimConfig, n_paths: int,
    threads: Optional[int],
) -> EnsembleSummary:
    result = simulate_ensemble(mech, ZeroCompetition(), x0, cfg, n_paths, threads=threads)
    return result.summary("laplace", lambda final: np.exp(-lam * final))


def mc_laplace_check(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    x0: float,
    lam: float,
    t: float,
    n_paths: int,
    cfg: SimConfig,
    threads: Optional[int] = None,
) -> LaplaceCheck:
    """
    Compare the Monte Carlo Laplace transform at time t with the flow solution.

    Args:
        mech: Branching mechanism
        g: Must be ZeroCompetition
        x0: Initial state > 0
        lam: λ ≥ 0
        t: Time ≥ 0 (overrides the horizon of ``cfg``)
        n_paths: Number of paths
        cfg: Simulation settings

    Returns:
        LaplaceCheck with the z-score of the Monte Carlo mean
    """
    _require_pure_branching(g)
    if lam < 0:
        raise PreconditionError(f"λ must be ≥ 0, got {lam}")
    if t < 0:
        raise PreconditionError(f"t must be ≥ 0, got {t}")
    if t == 0:
        exact = math.exp(-lam * x0)
        mc = EnsembleSummary("laplace", n_paths, exact, 0.0)
        return LaplaceCheck(float(x0), float(lam), 0.0, mc, exact, 0.0)

    analytic = laplace_transform(mech, x0, lam, t)
    mc = _laplace_summary(mech, x0, lam, with_horizon(cfg, t), n_paths, threads)
    z = _z_score(mc.value - analytic, mc.std_error)
    logger.info(f"mc_laplace_check: MC {mc.value:.6g} ± {mc.std_error:.2g}, analytic {analytic:.6g}, z={z:.3g}")
    return LaplaceCheck(float(x0), float(lam), float(t), mc, analytic, z)


@dataclass(frozen=True)
class BranchingCheck:
    """Laplace means from x + y against the product of those from x and y."""

    joint: EnsembleSummary
    left: EnsembleSummary
    right: EnsembleSummary
    product: float
    product_se: float
    z_score: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "joint": self.joint.to_dict(),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
            "product": self.product,
            "product_se": self.product_se,
            "z_score": self.z_score,
        }


def mc_branching_check(
    mech: BranchingMechanism,
    x: float,
    y: float,
    lam: float,
    t: float,
    n_paths: int,
    cfg: SimConfig,
    threads: Optional[int] = None,
) -> BranchingCheck:
    """
    Check Q_t(x+y, ·) = Q_t(x, ·) * Q_t(y, ·) through Laplace means (no competition).

    The three ensembles use streams cfg.stream, cfg.stream + 1, cfg.stream + 2.
    """
    if not (x > 0 and y > 0 and t > 0):
        raise PreconditionError("need x > 0, y > 0 and t > 0")
    joint = _laplace_summary(mech, x + y, lam, with_horizon(cfg, t), n_paths, threads)
    left = _laplace_summary(mech, x, lam, with_horizon(cfg, t, cfg.stream + 1), n_paths, threads)
    right = _laplace_summary(mech, y, lam, with_horizon(cfg, t, cfg.stream + 2), n_paths, threads)
    product = left.value * right.value
    # Delta method for the product of independent means
    product_se = math.hypot(right.value * left.std_error, left.value * right.std_error)
    z = _z_score(joint.value - product, math.hypot(joint.std_error, product_se))
    return BranchingCheck(joint, left, right, product, product_se, z)


@dataclass(frozen=True)
class RefinementCheck:
    """Laplace estimates at (Δt, ε) and (Δt/2, ε/2)."""

    coarse: EnsembleSummary
    fine: EnsembleSummary
    z_score: float


def refinement_check(
    mech: BranchingMechanism,
    x0: float,
    lam: float,
    t: float,
    n_paths: int,
    cfg: SimConfig,
    threads: Optional[int] = None,
) -> RefinementCheck:
    """Halve Δt and ε and compare the Monte Carlo Laplace estimates."""
    coarse_cfg = with_horizon(cfg, t)
    fine_cfg = replace(coarse_cfg, dt=cfg.dt / 2, eps=cfg.eps / 2, stream=cfg.stream + 1)
    coarse = _laplace_summary(mech, x0, lam, coarse_cfg, n_paths, threads)
    fine = _laplace_summary(mech, x0, lam, fine_cfg, n_paths, threads)
    z = _z_score(fine.value - coarse.value, math.hypot(coarse.std_error, fine.std_error))
    return RefinementCheck(coarse, fine, z)
