"""
Conditional laws given survival and quasi-stationary distribution estimates.

Two estimators are provided: plain conditioning of an ensemble on survival,
and a Fleming-Viot particle system in which an absorbed particle jumps onto a
uniformly chosen survivor.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Union

import numpy as np
from scipy import stats

from .cbflow import extinction_prob
from .config.constants import DEFAULT_BINS, MIN_PARTICLES, MIN_RATE_POINTS, MIN_SURVIVORS, PILOT_PATHS
from .core.errors import (
    InvariantBreach,
    NumericalFailure,
    PreconditionError,
    SurvivorDepletion,
)
from .core.interfaces import CompetitionFunction
from .generator.operators import apply_L
from .generator.test_functions import CouplingPhi
from .mechanism.branching import BranchingMechanism
from .mechanism.conditions import near_zero_check
from .simulator.config import SimConfig
from .simulator.estimators import wilson_interval
from .simulator.paths import require_nonexplosion, simulate_ensemble, with_horizon
from .simulator.scheme import JumpAdaptedEuler, block_rng


logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12
METRICS = ("TV", "W1")


def adaptive_bin_count(n_samples: int) -> int:
    """Bins for equal-probability histograms: grows like √n, between 5 and DEFAULT_BINS."""
    return min(DEFAULT_BINS, max(5, int(math.sqrt(max(n_samples, 0)) / 4)))


def common_bins(*samples: np.ndarray, bins: Optional[int] = None) -> np.ndarray:
    """Equal-probability bin edges of the pooled samples."""
    pooled = np.concatenate([np.asarray(s, dtype=float).ravel() for s in samples])
    if pooled.size == 0:
        raise PreconditionError("cannot bin an empty sample")
    count = bins or adaptive_bin_count(pooled.size)
    distinct = np.unique(pooled)
    if distinct.size == 1:
        # All samples equal: one bin just wide enough to hold them
        return np.array([distinct[0], np.nextafter(distinct[0], np.inf)])
    if distinct.size <= count:
        # Few atoms: one bin around each
        middles = 0.5 * (distinct[:-1] + distinct[1:])
        return np.concatenate(([distinct[0]], middles, [distinct[-1]]))
    return np.unique(np.quantile(pooled, np.linspace(0.0, 1.0, count + 1)))


@dataclass(frozen=True)
class EmpiricalDistribution:
    """
    Histogram of a law on (0, ∞), optionally with the samples behind it.

    Samples outside the bin edges are counted in the end bins.
    """

    edges: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    n_samples: int = 0

    def __post_init__(self) -> None:
        if abs(float(self.masses.sum()) - 1.0) > NORMALIZATION_TOL:
            raise InvariantBreach(f"empirical law has total mass {self.masses.sum()!r}")
        if self.edges[0] <= 0.0 or (self.samples is not None and np.any(self.samples <= 0.0)):
            raise InvariantBreach("empirical law puts mass at or below 0")

    @classmethod
    def from_samples(
        cls,
        samples: np.ndarray,
        bins: Optional[int] = None,
        edges: Optional[np.ndarray] = None,
    ) -> "EmpiricalDistribution":
        data = np.asarray(samples, dtype=float).ravel()
        if data.size == 0:
            raise PreconditionError("empirical law needs at least one sample")
        edges = common_bins(data, bins=bins) if edges is None else np.asarray(edges, dtype=float)
        counts, _ = np.histogram(np.clip(data, edges[0], edges[-1]), bins=edges)
        masses = counts / data.size
        masses = masses / masses.sum()
        return cls(edges=edges, masses=masses, samples=data, n_samples=int(data.size))

    @classmethod
    def point_mass(cls, x: float, n_samples: int = 1) -> "EmpiricalDistribution":
        return cls.from_samples(np.full(n_samples, float(x)))

    @property
    def effective_sample_size(self) -> int:
        return self.n_samples

    @property
    def mean(self) -> float:
        if self.samples is not None:
            return float(self.samples.mean())
        return float(np.dot(self.masses, 0.5 * (self.edges[:-1] + self.edges[1:])))

    def rebin(self, edges: np.ndarray) -> "EmpiricalDistribution":
        if self.samples is None:
            raise PreconditionError("rebinning needs the underlying samples")
        return EmpiricalDistribution.from_samples(self.samples, edges=edges)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n states: resample the data, or uniform within bins chosen by mass."""
        if self.samples is not None:
            return rng.choice(self.samples, size=n)
        idx = rng.choice(self.masses.size, size=n, p=self.masses)
        lo, hi = self.edges[idx], self.edges[idx + 1]
        return lo + (hi - lo) * rng.random(n)

    def rows(self) -> list[tuple[float, float, float]]:
        return [
            (float(lo), float(hi), float(m))
            for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.masses)
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_samples": self.n_samples,
            "mean": self.mean,
            "bins": [{"lo": lo, "hi": hi, "mass": m} for lo, hi, m in self.rows()],
        }


InitialLaw = Union[float, EmpiricalDistribution]


def _aux_rng(cfg: SimConfig, tag: int) -> np.random.Generator:
    """Generator for draws outside the path blocks (initial states, pilots)."""
    sequence = np.random.SeedSequence(cfg.seed, spawn_key=(cfg.stream, 0, tag))
    return np.random.Generator(np.random.Philox(sequence))


def _initial_states(init: InitialLaw, n: int, cfg: SimConfig) -> np.ndarray:
    if isinstance(init, EmpiricalDistribution):
        return init.sample(_aux_rng(cfg, 1), n)
    if not init > 0:
        raise PreconditionError(f"initial point must be > 0, got {init}")
    return np.full(n, float(init))


def distribution_distance(
    p: EmpiricalDistribution, q: EmpiricalDistribution, metric: str = "TV"
) -> float:
    """
    Distance between two empirical laws.

    Args:
        p: First law
        q: Second law
        metric: "TV" (needs identical bin edges) or "W1"

    Returns:
        ½ Σ|p_i - q_i| for TV; the 1-Wasserstein distance for W1
    """
    if metric == "TV":
        if p.edges.shape != q.edges.shape or not np.array_equal(p.edges, q.edges):
            raise PreconditionError("TV distance needs identical bin edges; rebin both on common_bins")
        return 0.5 * float(np.abs(p.masses - q.masses).sum())
    if metric == "W1":
        if p.samples is not None and q.samples is not None:
            return float(stats.wasserstein_distance(p.samples, q.samples))
        mid_p = 0.5 * (p.edges[:-1] + p.edges[1:])
        mid_q = 0.5 * (q.edges[:-1] + q.edges[1:])
        return float(stats.wasserstein_distance(mid_p, mid_q, p.masses, q.masses))
    raise PreconditionError(f"unknown metric {metric!r}; use one of {METRICS}")


def tv_between_samples(a: np.ndarray, b: np.ndarray, bins: Optional[int] = None) -> float:
    """TV distance of two samples histogrammed on their common bins."""
    edges = common_bins(a, b, bins=bins)
    return distribution_distance(
        EmpiricalDistribution.from_samples(a, edges=edges),
        EmpiricalDistribution.from_samples(b, edges=edges),
    )


def _expected_survival(
    mech: BranchingMechanism, g: CompetitionFunction, init: InitialLaw, t: float,
    n_paths: int, cfg: SimConfig,
) -> float:
    if g.kind == "zero" and not isinstance(init, EmpiricalDistribution):
        try:
            return 1.0 - extinction_prob(mech, float(init), t)
        except PreconditionError:
            # Without Grey's condition there is no extinction in finite time
            return 1.0
    pilot_n = min(PILOT_PATHS, n_paths)
    pilot_cfg = replace(with_horizon(cfg, t), stream=cfg.stream + 1)
    states = _initial_states(init, pilot_n, pilot_cfg)
    pilot = simulate_ensemble(mech, g, states, pilot_cfg, pilot_n)
    return float(np.mean(pilot.final > 0.0))


def _survivors(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    states: np.ndarray,
    t: float,
    cfg: SimConfig,
    threads: Optional[int],
) -> np.ndarray:
    final = simulate_ensemble(
        mech, g, states, with_horizon(cfg, t), states.size, threads=threads
    ).final
    alive = final[final > 0.0]
    if alive.size < MIN_SURVIVORS:
        raise SurvivorDepletion(
            f"only {alive.size} of {states.size} paths survive to t={t}; "
            f"use the Fleming-Viot estimator instead"
        )
    return alive


def conditional_law_naive(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    init: InitialLaw,
    t: float,
    n_paths: int,
    cfg: SimConfig,
    bins: Optional[int] = None,
    threads: Optional[int] = None,
) -> EmpiricalDistribution:
    """
    Law of Y_t given survival to t, by discarding absorbed paths.

    The expected survivor count is checked first (extinction probability for
    a point start without competition, a pilot run otherwise).
    """
    if t < 0:
        raise PreconditionError(f"t must be ≥ 0, got {t}")
    states = _initial_states(init, n_paths, cfg)
    if t == 0:
        return EmpiricalDistribution.from_samples(states, bins=bins)

    expected = _expected_survival(mech, g, init, t, n_paths, cfg) * n_paths
    if expected < MIN_SURVIVORS:
        raise SurvivorDepletion(
            f"about {expected:.0f} of {n_paths} paths are expected to survive to t={t}; "
            f"use the Fleming-Viot estimator instead"
        )
    alive = _survivors(mech, g, states, t, cfg, threads)
    logger.info(f"conditional_law_naive: {alive.size}/{n_paths} survivors at t={t}")
    return EmpiricalDistribution.from_samples(alive, bins=bins)


@dataclass
class ParticleEnsemble:
    """Fleming-Viot particles; every state is positive between resampling events."""

    states: np.ndarray
    clock: float = 0.0
    resurrections: int = 0
    seed: int = 0
    stream: int = 0
    history: list[tuple[float, int]] = field(default_factory=list)
    snapshots: dict[float, np.ndarray] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.states.size)


class FlemingViot:
    """Advance a particle ensemble step by step with resampling of absorbed particles."""

    def __init__(self, mech: BranchingMechanism, g: CompetitionFunction, cfg: SimConfig):
        self.mech = mech
        self.g = g
        self.cfg = cfg
        self._engines: dict[float, JumpAdaptedEuler] = {}
        self.rng = block_rng(cfg.seed, cfg.stream, 0)

    def _engine(self, h: float) -> JumpAdaptedEuler:
        if h not in self._engines:
            step_cfg = replace(self.cfg, dt=h, horizon=h)
            self._engines[h] = JumpAdaptedEuler(self.mech, self.g, step_cfg)
        return self._engines[h]

    def step(self, ensemble: ParticleEnsemble, h: float) -> None:
        trace = self._engine(h).run(ensemble.states, self.rng)
        states = trace.final
        dead = np.nonzero(states == 0.0)[0]
        if dead.size:
            alive = np.nonzero(states > 0.0)[0]
            if not alive.size:
                raise NumericalFailure(
                    f"all {ensemble.size} particles were absorbed in the step ending at "
                    f"t={ensemble.clock + h:g}"
                )
            # Serialized by (death time, particle index)
            order = np.lexsort((dead, trace.absorbed_at[dead]))
            dead = dead[order]
            donors = alive[self.rng.integers(0, alive.size, dead.size)]
            states[dead] = states[donors]
            ensemble.resurrections += int(dead.size)
            ensemble.history.append((ensemble.clock + h, int(dead.size)))
            if dead.size > ensemble.size // 2:
                logger.warning(
                    f"Fleming-Viot: {dead.size} of {ensemble.size} particles absorbed in one step "
                    f"at t={ensemble.clock + h:g}; consider a smaller Δt"
                )
        if np.any(states <= 0.0):
            raise InvariantBreach("Fleming-Viot particle left non-positive after resampling")
        ensemble.states = states
        ensemble.clock += h

    def run(self, ensemble: ParticleEnsemble, times: list[float]) -> ParticleEnsemble:
        """Advance to each time in ``times`` (sorted), keeping a snapshot at each."""
        for target in sorted(times):
            while ensemble.clock < target - 1e-12:
                self.step(ensemble, min(self.cfg.dt, target - ensemble.clock))
            ensemble.snapshots[float(target)] = ensemble.states.copy()
        return ensemble


def run_fleming_viot(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    init: InitialLaw,
    times: list[float],
    n_particles: int,
    cfg: SimConfig,
) -> ParticleEnsemble:
    """
    Run a Fleming-Viot system from ``init`` and snapshot it at ``times``.

    Args:
        mech: Branching mechanism
        g: Competition function
        init: Initial point or law
        times: Snapshot times ≥ 0
        n_particles: Particle count ≥ MIN_PARTICLES
        cfg: Step size, truncation and seed (the horizon is ignored)

    Returns:
        ParticleEnsemble with one snapshot per requested time
    """
    if n_particles < MIN_PARTICLES:
        raise PreconditionError(f"Fleming-Viot needs at least {MIN_PARTICLES} particles, got {n_particles}")
    if any(t < 0 for t in times):
        raise PreconditionError("snapshot times must be ≥ 0")
    require_nonexplosion(mech, g, cfg)
    ensemble = ParticleEnsemble(
        states=_initial_states(init, n_particles, cfg), seed=cfg.seed, stream=cfg.stream
    )
    FlemingViot(mech, g, cfg).run(ensemble, times)
    logger.info(
        f"Fleming-Viot: {n_particles} particles to t={ensemble.clock:g}, "
        f"{ensemble.resurrections} resurrections"
    )
    return ensemble


def fleming_viot(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    init: InitialLaw,
    t: float,
    n_particles: int,
    cfg: SimConfig,
    bins: Optional[int] = None,
) -> EmpiricalDistribution:
    """Fleming-Viot estimate of the law of Y_t given survival."""
    ensemble = run_fleming_viot(mech, g, init, [t], n_particles, cfg)
    return EmpiricalDistribution.from_samples(ensemble.snapshots[float(t)], bins=bins)


@dataclass(frozen=True)
class ConvergenceFit:
    """Fit of log d(t) = log C - λ t over the points above the noise floor."""

    times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    lambda_hat: float = math.nan
    c_hat: float = math.nan
    r2: float = math.nan
    noise_floor: float = 0.0
    points_used: int = 0
    lambda_lower_bound: Optional[float] = None

    @property
    def already_converged(self) -> bool:
        return self.lambda_lower_bound is not None

    @property
    def converged(self) -> bool:
        return self.already_converged or self.lambda_hat > 0

    @property
    def verdict(self) -> str:
        if self.already_converged:
            return "already converged"
        return "converged" if self.lambda_hat > 0 else "not converged"

    def rows(self) -> list[tuple[float, float]]:
        return [(float(t), float(d)) for t, d in zip(self.times, self.distances)]

    def to_dict(self) -> dict[str, Any]:
        def clean(value: float) -> Optional[float]:
            return None if value is None or not math.isfinite(value) else float(value)

        data: dict[str, Any] = {
            "lambda_hat": clean(self.lambda_hat),
            "C_hat": clean(self.c_hat),
            "r2": clean(self.r2),
            "noise_floor": self.noise_floor,
            "points_used": self.points_used,
            "verdict": self.verdict,
        }
        if self.lambda_lower_bound is not None:
            data["lambda_lower_bound"] = self.lambda_lower_bound
        return data


def fit_exponential_decay(
    times: Any, distances: Any, noise_floor: float = 0.0
) -> ConvergenceFit:
    """Least-squares fit of log d = log C - λ t on the points with d above ``noise_floor``."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(distances, dtype=float)
    use = d > noise_floor
    if use.sum() < 2:
        floor = max(noise_floor, np.finfo(float).tiny)
        t_min = float(t.min())
        bound = math.log(1.0 / floor) / t_min if t_min > 0 and floor < 1.0 else 0.0
        return ConvergenceFit(t, d, noise_floor=noise_floor, points_used=int(use.sum()),
                              lambda_lower_bound=bound)

    slope, intercept = np.polyfit(t[use], np.log(d[use]), 1)
    predicted = intercept + slope * t[use]
    log_d = np.log(d[use])
    ss_res = float(np.sum((log_d - predicted) ** 2))
    ss_tot = float(np.sum((log_d - log_d.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ConvergenceFit(
        times=t,
        distances=d,
        lambda_hat=float(-slope),
        c_hat=float(math.exp(intercept)),
        r2=r2,
        noise_floor=noise_floor,
        points_used=int(use.sum()),
    )


def convergence_rate_fit(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    init1: InitialLaw,
    init2: InitialLaw,
    t_grid: list[float],
    n_particles: int,
    cfg: SimConfig,
    bins: Optional[int] = None,
) -> ConvergenceFit:
    """
    Fit the exponential rate at which Fleming-Viot laws from two starts merge.

    Both systems run on the same (seed, stream), so identical starts give
    identical laws. The noise floor is 2/√N.
    """
    times = sorted(float(t) for t in t_grid)
    if len(times) < MIN_RATE_POINTS:
        raise PreconditionError(f"rate fit needs at least {MIN_RATE_POINTS} times, got {len(times)}")
    first = run_fleming_viot(mech, g, init1, times, n_particles, cfg)
    second = run_fleming_viot(mech, g, init2, times, n_particles, cfg)
    distances = [
        tv_between_samples(first.snapshots[t], second.snapshots[t], bins=bins) for t in times
    ]
    floor = 2.0 / math.sqrt(n_particles)
    fit = fit_exponential_decay(times, distances, floor)
    logger.info(
        f"convergence_rate_fit: d(t)={[round(d, 4) for d in distances]}, "
        f"floor={floor:.3g}, verdict {fit.verdict}"
    )
    return fit


def qsd_fixed_point_residual(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    pi_hat: EmpiricalDistribution,
    t: float,
    n_paths: int,
    cfg: SimConfig,
    bins: Optional[int] = None,
    threads: Optional[int] = None,
) -> float:
    """
    TV distance between π̂ and the law at t of paths started from π̂ and conditioned on survival.

    Both laws are histogrammed on the common bins of their samples.
    """
    if pi_hat.effective_sample_size < MIN_SURVIVORS:
        raise PreconditionError(
            f"π̂ needs at least {MIN_SURVIVORS} effective samples, has {pi_hat.effective_sample_size}"
        )
    if t < 0:
        raise PreconditionError(f"t must be ≥ 0, got {t}")
    reference = pi_hat.samples if pi_hat.samples is not None else pi_hat.sample(_aux_rng(cfg, 2), n_paths)
    states = pi_hat.sample(_aux_rng(cfg, 1), n_paths)
    evolved = states if t == 0 else _survivors(mech, g, states, t, cfg, threads)
    residual = tv_between_samples(reference, evolved, bins=bins)
    logger.info(f"qsd_fixed_point_residual: {residual:.4g} at t={t}")
    return residual


@dataclass(frozen=True)
class SmallStartRow:
    """Survival estimate from a small start against its envelope."""

    y: float
    survival: float
    std_error: float
    ci_low: float
    ci_high: float
    envelope: Optional[float]

    @property
    def dominated(self) -> Optional[bool]:
        """Whether the estimate lies below the envelope up to 2 standard errors."""
        if self.envelope is None:
            return None
        return self.survival - 2.0 * self.std_error <= self.envelope


@dataclass(frozen=True)
class SmallStartProbe:
    """Survival probabilities from small starts with φ(y)/t + φ(y)/φ(δ) envelopes."""

    t: float
    rho: float
    delta: Optional[float]
    rows: tuple[SmallStartRow, ...]

    @property
    def monotone(self) -> bool:
        """Survival is non-decreasing in y."""
        ordered = sorted(self.rows, key=lambda r: r.y)
        return all(a.survival <= b.survival for a, b in zip(ordered, ordered[1:]))

    def table(self) -> list[tuple[float, float, float, Optional[float]]]:
        return [(r.y, r.survival, r.std_error, r.envelope) for r in self.rows]

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "rho": self.rho,
            "delta": self.delta,
            "monotone": self.monotone,
            "rows": [
                {
                    "y": r.y,
                    "survival": r.survival,
                    "std_error": r.std_error,
                    "wilson": [r.ci_low, r.ci_high],
                    "envelope": r.envelope,
                    "dominated": r.dominated,
                }
                for r in self.rows
            ],
        }


def find_delta(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    phi: CouplingPhi,
    max_exponent: int = 20,
    depth: int = 20,
) -> Optional[float]:
    """Largest δ = 2^-k with Lφ < -1 at every δ·2^-j, j = 0..depth; None if none found."""
    for k in range(1, max_exponent + 1):
        delta = 2.0**-k
        points = delta * 2.0 ** -np.arange(depth + 1)
        try:
            if all(apply_L(mech, g, phi, float(x)) < -1.0 for x in points):
                return delta
        except NumericalFailure as exc:
            logger.debug(f"find_delta: Lφ failed near δ={delta:g}: {exc}")
    return None


def small_initial_extinction_probe(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    y_grid: list[float],
    t: float,
    n_paths: int,
    cfg: SimConfig,
    delta: Optional[float] = None,
    theta: Optional[float] = None,
    threads: Optional[int] = None,
) -> SmallStartProbe:
    """
    Estimate P_y(τ₀⁻ > t) for small y against φ(y)/t + φ(y)/φ(δ).

    φ(r) = 1 - exp(-r^ρ) with ρ = (1 - θ)/2. When ``delta`` is not given it is
    found by a grid search for Lφ < -1 near 0; if the search fails the rows
    carry no envelope.
    """
    report = near_zero_check(mech, g, theta)
    if not report.satisfied:
        raise PreconditionError(
            "small-start probe needs c = 0, g(x) ≥ κ x^θ near 0 and μ(dz) ≥ C z^-2 dz on (0, 1]"
        )
    theta = float(report.evidence_value("theta"))
    if not t > 0:
        raise PreconditionError(f"t must be > 0, got {t}")
    rho = (1.0 - theta) / 2.0
    phi = CouplingPhi(rho)
    if delta is None:
        delta = find_delta(mech, g, phi)
        if delta is None:
            logger.warning("small-start probe: no δ with Lφ < -1 found; reporting without envelope")

    rows = []
    for i, y in enumerate(sorted(y_grid, reverse=True)):
        run_cfg = with_horizon(cfg, t, stream=cfg.stream + i)
        final = simulate_ensemble(mech, g, float(y), run_cfg, n_paths, threads=threads).final
        alive = int(np.sum(final > 0.0))
        p = alive / n_paths
        low, high = wilson_interval(alive, n_paths)
        envelope = None
        if delta is not None:
            phi_y = float(phi.value(y))
            envelope = phi_y / t + phi_y / float(phi.value(delta))
        rows.append(
            SmallStartRow(
                y=float(y),
                survival=p,
                std_error=math.sqrt(p * (1.0 - p) / n_paths),
                ci_low=low,
                ci_high=high,
                envelope=envelope,
            )
        )
    probe = SmallStartProbe(t=float(t), rho=rho, delta=delta, rows=tuple(rows))
    if not probe.monotone:
        logger.warning("small-start probe: survival is not monotone in y")
    return probe
