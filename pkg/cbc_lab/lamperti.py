"""
Lévy process behind a CB-process and the Lamperti time change.

The Lévy process N started at x has E_x[exp(-λN_t)] = exp(-λx + Ψ(λ)t): drift
-b, Gaussian part of variance 2c per unit time and positive jumps from μ,
with the same small-jump surrogate as the path simulator. Running N on the
clock η(t) = ∫_0^t ds / N_s and stopping it at a level ε gives a CB-process
path (stopped near 0).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import stats

from .config.constants import DEFAULT_EPS_FACTOR, DEPLETION_FRACTION, LEVY_HORIZON_FACTOR
from .core.errors import PreconditionError
from .mechanism.branching import BranchingMechanism
from .mechanism.competition import ZeroCompetition
from .services.runners import run_chunked
from .simulator.config import SimConfig
from .simulator.estimators import wilson_interval
from .simulator.paths import simulate_ensemble, with_horizon
from .simulator.scheme import EVENT_STEP, block_rng


logger = logging.getLogger(__name__)


class LevyIncrements:
    """Increments of N over a step h, for a block of paths."""

    def __init__(self, mech: BranchingMechanism, cfg: SimConfig):
        self.mech = mech
        mu = mech.mu
        self.rate = 0.0 if mu.kind == "zero" else float(mu.jump_rate(cfg.eps))
        compensator = 0.0 if mu.kind == "zero" else float(mu.compensator_mean(cfg.eps))
        small = 0.0 if mu.kind == "zero" else float(mu.small_variance(cfg.eps))
        self.drift = -(mech.b + compensator)
        self.variance = 2.0 * mech.c + small
        self.eps = cfg.eps

    def draw(self, rng: np.random.Generator, n: int, h: Any) -> np.ndarray:
        """Increments over Lévy steps h (a scalar or one step per path)."""
        h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
        inc = self.drift * h
        if self.variance > 0.0:
            inc = inc + np.sqrt(self.variance * h) * rng.standard_normal(n)
        if self.rate > 0.0:
            counts = rng.poisson(self.rate * h)
            total = int(counts.sum())
            if total:
                sizes = self.mech.mu.sample_jumps(rng, self.eps, total)
                owners = np.repeat(np.arange(n), counts)
                inc = inc + np.bincount(owners, weights=sizes, minlength=n)
        return inc


@dataclass(frozen=True)
class LevyPath:
    """A batch of Lévy paths on a common time grid (one row per path)."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    mechanism: Optional[BranchingMechanism] = None
    x0: float = 0.0
    seed: int = 0
    stream: int = 0

    def __post_init__(self) -> None:
        if self.values.ndim == 1:
            object.__setattr__(self, "values", self.values[None, :])

    @property
    def n_paths(self) -> int:
        return int(self.values.shape[0])

    @property
    def final(self) -> np.ndarray:
        return self.values[:, -1]

    def path(self, index: int = 0) -> np.ndarray:
        return self.values[index]

    def value_at(self, t: float) -> np.ndarray:
        """Values of every path at the last grid time ≤ t."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[:, max(k, 0)]

    def rows(self, index: int = 0) -> list[tuple[float, float, str]]:
        return [(float(t), float(v), EVENT_STEP) for t, v in zip(self.times, self.values[index])]


def simulate_levy(
    mech: BranchingMechanism,
    x0: float,
    cfg: SimConfig,
    n_paths: int = 1,
    threads: Optional[int] = None,
) -> LevyPath:
    """
    Euler paths of N from x0 on the grid of ``cfg``.

    Args:
        mech: Branching mechanism (its Ψ is the Laplace exponent of N)
        x0: Starting point (any real)
        cfg: Grid, small-jump truncation and seed; block k uses (seed, stream, k)
        n_paths: Number of paths
        threads: Worker threads

    Returns:
        LevyPath with ``n_paths`` rows
    """
    if n_paths < 1:
        raise PreconditionError(f"n_paths must be ≥ 1, got {n_paths}")
    times = np.asarray(cfg.grid())
    steps = np.diff(times)
    increments = LevyIncrements(mech, cfg)

    def task(block: int, size: int) -> np.ndarray:
        rng = block_rng(cfg.seed, cfg.stream, block)
        values = np.empty((size, times.size))
        values[:, 0] = x0
        for k, h in enumerate(steps):
            values[:, k + 1] = values[:, k] + increments.draw(rng, size, float(h))
        return values

    blocks = run_chunked(task, n_paths, threads=threads)
    return LevyPath(
        times=times,
        values=np.concatenate(blocks, axis=0),
        mechanism=mech,
        x0=float(x0),
        seed=cfg.seed,
        stream=cfg.stream,
    )


def _cell_clock(prev: Any, end: Any, span: Any) -> Any:
    """
    ∫ ds/N over cells of Lévy length ``span`` on which N runs linearly from prev to end.

    Equals span·log(prev/end)/(prev − end); a cell ending at or below 0 (ε = 0)
    falls back to the left-point value span/prev.
    """
    prev = np.asarray(prev, dtype=float)
    end = np.asarray(end, dtype=float)
    top = np.where(end > 0, end, prev)
    flat = np.abs(prev - top) <= 1e-12 * prev
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(flat, 2.0 / (prev + top), np.log(prev / top) / (prev - top))
    return np.asarray(span, dtype=float) * mean


def _cell_level(prev: Any, end: Any, span: Any, r: Any) -> tuple[Any, Any]:
    """
    Invert ``_cell_clock`` inside one cell: the level and Lévy offset at clock offset r.

    With slope k = (end − prev)/span the clock solves log(N/prev)/k = r, so
    N = prev·e^{kr}.
    """
    prev = np.asarray(prev, dtype=float)
    end = np.asarray(end, dtype=float)
    span = np.asarray(span, dtype=float)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        slope = np.where((end > 0) & (span > 0), (end - prev) / span, 0.0)
        level = prev * np.exp(slope * r)
        offset = np.where(
            slope != 0.0, prev * np.expm1(slope * r) / np.where(slope != 0.0, slope, 1.0), r * prev
        )
    return level, offset


@dataclass(frozen=True)
class TimeChange:
    """
    The clock η(t) = ∫_0^t ds / N_s of one Lévy path, stopped when N first reaches ε.

    ``times`` and ``clock`` run up to the stopping time S (interpolated inside
    the last cell) or up to the end of the path grid when N stays above ε.
    N is taken linear inside each cell and the clock is exact for that path.
    """

    eps: float
    times: np.ndarray = field(repr=False)
    clock: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)
    stopped: bool = False

    @property
    def stop_time(self) -> float:
        """S_ε⁻ in Lévy time (inf when N stays above ε on the grid)."""
        return float(self.times[-1]) if self.stopped else math.inf

    @property
    def total(self) -> float:
        """η at the end of the stopped path; this is T_ε⁻ when ``stopped``."""
        return float(self.clock[-1])

    def _cell(self, k: int) -> tuple[float, float, float]:
        return float(self.levels[k]), float(self.levels[k + 1]), float(self.times[k + 1] - self.times[k])

    def eta(self, t: float) -> float:
        if t <= self.times[0] or self.times.size < 2:
            return 0.0
        if t >= self.times[-1]:
            return self.total
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        prev, end, span = self._cell(k)
        part = t - self.times[k]
        mid = prev + (end - prev) * part / span
        return float(self.clock[k] + _cell_clock(prev, mid, part))

    def _locate(self, s: float) -> tuple[float, float]:
        k = int(np.searchsorted(self.clock, s, side="right")) - 1
        k = min(max(k, 0), self.clock.size - 2)
        prev, end, span = self._cell(k)
        level, offset = _cell_level(prev, end, span, s - self.clock[k])
        return float(self.times[k] + offset), float(level)

    def inverse(self, s: float) -> float:
        """η⁻¹(s); clock values past the end map to the last time."""
        if s <= 0.0 or self.times.size < 2:
            return float(self.times[0])
        if s >= self.total:
            return float(self.times[-1])
        return self._locate(s)[0]

    def value_on_clock(self, s: float) -> float:
        """The time-changed path at clock time s (0 once stopped, nan past an unstopped end)."""
        if s >= self.total:
            return 0.0 if self.stopped else math.nan
        if s <= 0.0:
            return float(self.levels[0])
        return self._locate(s)[1]


def time_change(path: LevyPath, eps: float, index: int = 0) -> TimeChange:
    """
    Accumulate η cell by cell and stop at the first passage below ε.

    A cell in which N drops to ε is cut at the linearly interpolated crossing
    point; the clock is not integrated past it.
    """
    values = np.asarray(path.path(index), dtype=float)
    times = np.asarray(path.times, dtype=float)
    if eps < 0:
        raise PreconditionError(f"stopping level must be ≥ 0, got {eps}")
    if not values[0] > eps:
        raise PreconditionError(f"path must start above ε={eps}, starts at {values[0]}")

    below = np.nonzero(values <= eps)[0]
    stopped = bool(below.size)
    if stopped:
        k = int(below[0])
        prev, new = values[k - 1], values[k]
        theta = (prev - eps) / (prev - new)
        stop = times[k - 1] + theta * (times[k] - times[k - 1])
        times = np.append(times[:k], stop)
        levels = np.append(values[:k], eps)
    else:
        levels = values
    cells = _cell_clock(levels[:-1], levels[1:], np.diff(times))
    clock = np.concatenate(([0.0], np.cumsum(cells)))
    return TimeChange(eps=float(eps), times=times, clock=clock, levels=levels, stopped=stopped)


@dataclass
class _ClockRun:
    """Per-path outcome of running N on the η clock."""

    value: np.ndarray
    s_down: np.ndarray
    t_down: np.ndarray
    s_up: np.ndarray
    t_up: np.ndarray

    @property
    def unfinished(self) -> int:
        return int(np.sum(np.isnan(self.value)))


def _run_clock(
    increments: LevyIncrements,
    x0: float,
    eps: float,
    target: float,
    min_levy_time: float,
    up_level: Optional[float],
    h: float,
    rng: np.random.Generator,
    n: int,
) -> _ClockRun:
    """
    Run n Lévy paths from x0 until each is stopped at ε or its clock reaches target.

    A path at level N takes a Lévy step of length h·N, so every cell advances
    the clock by about h; the clock over a cell is the exact integral of 1/N
    along the straight line between its end points. A path keeps running
    until its Lévy time reaches ``min_levy_time``; Lévy time and clock are
    both capped at LEVY_HORIZON_FACTOR·max(target, min_levy_time)·(1 + x0).
    """
    level = np.full(n, float(x0))
    eta = np.zeros(n)
    s = np.zeros(n)
    value = np.full(n, np.nan)
    stopped = np.zeros(n, dtype=bool)
    s_down = np.full(n, np.inf)
    t_down = np.full(n, np.inf)
    start_up = 0.0 if up_level is not None and x0 >= up_level else np.inf
    s_up = np.full(n, start_up)
    t_up = np.full(n, start_up)

    cap = max(LEVY_HORIZON_FACTOR * max(target, min_levy_time) * (1.0 + x0), min_levy_time)
    while True:
        active = ~stopped & (np.isnan(value) | (s < min_levy_time)) & (s < cap) & (eta < cap)
        idx = np.nonzero(active)[0]
        if not idx.size:
            break
        prev = level[idx]
        span = h * prev
        new = prev + increments.draw(rng, idx.size, span)
        hit = new <= eps
        theta = np.where(hit, (prev - eps) / np.where(hit, prev - new, 1.0), 1.0)
        end = np.where(hit, eps, new)
        cell = theta * span
        d = _cell_clock(prev, end, cell)

        # Absorption only counts when the clock has not reached target inside the cell
        pending = np.isnan(value[idx])
        reach = pending & (eta[idx] + d >= target)
        if np.any(reach):
            value[idx[reach]], _ = _cell_level(
                prev[reach], end[reach], cell[reach], target - eta[idx[reach]]
            )

        if up_level is not None:
            up = ~hit & (new >= up_level) & np.isinf(s_up[idx])
            s_up[idx[up]] = s[idx[up]] + span[up]
            t_up[idx[up]] = eta[idx[up]] + d[up]

        gone = idx[hit]
        s_down[gone] = s[gone] + cell[hit]
        t_down[gone] = eta[gone] + d[hit]
        value[idx[hit & pending & ~reach]] = 0.0
        stopped[gone] = True

        eta[idx] += d
        s[idx] += cell
        level[idx] = end

    return _ClockRun(value=value, s_down=s_down, t_down=t_down, s_up=s_up, t_up=t_up)


def _clock_ensemble(
    mech: BranchingMechanism,
    x0: float,
    eps: float,
    target: float,
    min_levy_time: float,
    up_level: Optional[float],
    cfg: SimConfig,
    n_paths: int,
    threads: Optional[int],
) -> _ClockRun:
    increments = LevyIncrements(mech, cfg)

    def task(block: int, size: int) -> _ClockRun:
        rng = block_rng(cfg.seed, cfg.stream, block)
        return _run_clock(increments, x0, eps, target, min_levy_time, up_level, cfg.dt, rng, size)

    parts = run_chunked(task, n_paths, threads=threads)
    return _ClockRun(
        value=np.concatenate([p.value for p in parts]),
        s_down=np.concatenate([p.s_down for p in parts]),
        t_down=np.concatenate([p.t_down for p in parts]),
        s_up=np.concatenate([p.s_up for p in parts]),
        t_up=np.concatenate([p.t_up for p in parts]),
    )


@dataclass(frozen=True)
class CrossValidation:
    """Two-sample KS comparison of time-changed Lévy values and direct CB values."""

    n: int
    ks_stat: float
    p_value: float
    eps: float
    t_probe: float
    absorbed_fraction: float = 0.0
    unfinished: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "ks_stat": self.ks_stat,
            "p_value": self.p_value,
            "eps": self.eps,
            "t_probe": self.t_probe,
        }


def crossvalidate(
    mech: BranchingMechanism,
    x0: float,
    t_probe: float,
    n_paths: int,
    cfg: SimConfig,
    eps: Optional[float] = None,
    threads: Optional[int] = None,
) -> CrossValidation:
    """
    Compare N at η⁻¹(t_probe) ∧ S_ε⁻ with direct simulation of Y_{t_probe}.

    Lévy paths use stream cfg.stream and direct paths cfg.stream + 1. Values at
    or below ε on either side count as absorbed (0).

    Args:
        mech: Branching mechanism (no competition)
        x0: Initial state > 0
        t_probe: CB time ≥ 0 at which the two laws are compared
        n_paths: Paths per sample
        cfg: Grid, truncation and seed settings
        eps: Stopping level (defaults to DEFAULT_EPS_FACTOR·x0)

    Returns:
        CrossValidation report
    """
    if not x0 > 0:
        raise PreconditionError(f"x0 must be > 0, got {x0}")
    if t_probe < 0:
        raise PreconditionError(f"t_probe must be ≥ 0, got {t_probe}")
    eps = DEFAULT_EPS_FACTOR * x0 if eps is None else float(eps)
    if t_probe == 0:
        return CrossValidation(n_paths, 0.0, 1.0, eps, 0.0)

    run = _clock_ensemble(mech, x0, eps, t_probe, 0.0, None, cfg, n_paths, threads)
    if run.unfinished:
        logger.warning(
            f"crossvalidate: {run.unfinished} Lévy paths hit the horizon cap; dropped from the sample"
        )
    lamperti_sample = run.value[~np.isnan(run.value)]
    lamperti_sample = np.where(lamperti_sample <= eps, 0.0, lamperti_sample)

    direct = simulate_ensemble(
        mech,
        ZeroCompetition(),
        x0,
        with_horizon(cfg, t_probe, cfg.stream + 1),
        n_paths,
        threads=threads,
    ).final
    direct = np.where(direct <= eps, 0.0, direct)

    absorbed = float(np.mean(lamperti_sample == 0.0)) if lamperti_sample.size else 1.0
    if absorbed > DEPLETION_FRACTION:
        logger.warning(
            f"crossvalidate: {absorbed:.0%} of Lévy paths stopped before t_probe={t_probe}; "
            f"the comparison has little power, try a smaller t_probe"
        )
    test = stats.ks_2samp(lamperti_sample, direct)
    report = CrossValidation(
        n=int(lamperti_sample.size),
        ks_stat=float(test.statistic),
        p_value=float(test.pvalue),
        eps=eps,
        t_probe=float(t_probe),
        absorbed_fraction=absorbed,
        unfinished=run.unfinished,
    )
    logger.info(f"crossvalidate: KS={report.ks_stat:.4g}, p={report.p_value:.3g}")
    return report


@dataclass(frozen=True)
class ProbeFrequency:
    """Empirical frequency of one event with its Wilson interval."""

    event: str
    hits: int
    n: int
    ci_low: float
    ci_high: float

    @property
    def frequency(self) -> float:
        return self.hits / self.n if self.n else 0.0

    @property
    def positive(self) -> bool:
        return self.ci_low > 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "event": self.event,
            "hits": self.hits,
            "n": self.n,
            "frequency": self.frequency,
            "wilson": [self.ci_low, self.ci_high],
            "positive": self.positive,
        }


@dataclass(frozen=True)
class PositivityProbe:
    """Frequencies of the four hitting events before time t."""

    x: float
    z: Optional[float]
    eps: float
    t: float
    frequencies: tuple[ProbeFrequency, ...]
    unfinished: int = 0

    def get(self, event: str) -> ProbeFrequency:
        for item in self.frequencies:
            if item.event == event:
                return item
        raise KeyError(event)

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": self.x,
            "z": self.z,
            "eps": self.eps,
            "t": self.t,
            "frequencies": [f.to_dict() for f in self.frequencies],
            "unfinished": self.unfinished,
        }


def _frequency(event: str, hits: np.ndarray) -> ProbeFrequency:
    k, n = int(hits.sum()), int(hits.size)
    low, high = wilson_interval(k, n)
    return ProbeFrequency(event=event, hits=k, n=n, ci_low=low, ci_high=high)


def hitting_positivity_probe(
    mech: BranchingMechanism,
    x: float,
    z: Optional[float],
    eps: float,
    t: float,
    n_paths: int,
    cfg: SimConfig,
    threads: Optional[int] = None,
) -> PositivityProbe:
    """
    Estimate P_x(S_ε⁻ < t), P_x(S_z^{ε,+} < t), P_x(T_ε⁻ < t) and P_x(T_z^{ε,+} < t).

    S are passage times of the Lévy path stopped at ε, T the same passages on
    the η clock. Upcrossing events are skipped when ``z`` is None.
    """
    if not x > eps >= 0:
        raise PreconditionError(f"need x > ε ≥ 0, got x={x}, ε={eps}")
    if z is not None and not z > x:
        raise PreconditionError(f"need z > x for upcrossing probes, got z={z}, x={x}")
    if not t > 0:
        raise PreconditionError(f"t must be > 0, got {t}")

    run = _clock_ensemble(mech, x, eps, t, t, z, cfg, n_paths, threads)
    events = [
        _frequency("S_down", run.s_down < t),
        _frequency("T_down", run.t_down < t),
    ]
    if z is not None:
        events.insert(1, _frequency("S_up", run.s_up < t))
        events.append(_frequency("T_up", run.t_up < t))
    probe = PositivityProbe(
        x=float(x), z=z, eps=float(eps), t=float(t),
        frequencies=tuple(events), unfinished=run.unfinished,
    )
    for item in probe.frequencies:
        logger.info(
            f"positivity probe {item.event}: {item.hits}/{item.n} "
            f"(Wilson [{item.ci_low:.3g}, {item.ci_high:.3g}])"
        )
    return probe
