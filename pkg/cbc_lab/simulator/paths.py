"""Single paths, ensembles and shared-noise coupled pairs."""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Optional, Union

import numpy as np

from ..core.config import get_config_manager
from ..core.errors import InvariantBreach, PreconditionError
from ..core.interfaces import CompetitionFunction
from ..core.models import EnsembleSummary
from ..generator.certificates import verify_nonexplosion
from ..generator.test_functions import LogOnePlus
from ..mechanism.branching import BranchingMechanism
from ..services.runners import combine_summaries, run_chunked
from .config import SimConfig
from .scheme import (
    EVENT_ABSORB,
    EVENT_JUMP,
    EVENT_STEP,
    BlockTrace,
    JumpAdaptedEuler,
    block_rng,
)


logger = logging.getLogger(__name__)

NONEXPLOSION_X_MAX = 1e6


@lru_cache(maxsize=64)
def _certified_nonexplosive(mech: BranchingMechanism, g: CompetitionFunction) -> bool:
    if math.isfinite(mech.psi_prime0()):
        # Finite mean: the CB part cannot explode and competition only lowers the drift
        return True
    cert = verify_nonexplosion(mech, g, LogOnePlus(), NONEXPLOSION_X_MAX)
    return cert.success


def require_nonexplosion(
    mech: BranchingMechanism, g: CompetitionFunction, cfg: SimConfig
) -> None:
    """Raise PreconditionError unless a non-explosion certificate exists or is overridden."""
    if cfg.allow_explosion:
        logger.warning("simulating without a non-explosion certificate (override set)")
        return
    if not _certified_nonexplosive(mech, g):
        raise PreconditionError(
            "no non-explosion certificate for this (mechanism, competition); "
            "set allow_explosion to simulate up to the horizon anyway"
        )


@dataclass(frozen=True)
class HitTimes:
    """First passage times of one level (``inf`` when not reached by the horizon)."""

    down: float
    up: float
    exact: float


@dataclass(frozen=True)
class PathSample:
    """A jump-adapted path: event times, states and event kinds."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    events: tuple[str, ...] = field(repr=False)
    absorption_time: float = math.inf
    hitting: dict[float, HitTimes] = field(default_factory=dict)
    jumps: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    @property
    def absorbed(self) -> bool:
        return math.isfinite(self.absorption_time)

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def value_at(self, t: float) -> float:
        """State at time t (right-continuous, constant between events)."""
        if t < 0:
            raise PreconditionError(f"t must be ≥ 0, got {t}")
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.values[max(idx, 0)])

    def rows(self) -> list[tuple[float, float, str]]:
        return [(float(t), float(y), e) for t, y, e in zip(self.times, self.values, self.events)]


def _label_events(values: np.ndarray, raw_kinds: list[str]) -> tuple[str, ...]:
    kinds = [EVENT_STEP]
    for i in range(1, values.size):
        if values[i] == 0.0 and values[i - 1] > 0.0:
            kinds.append(EVENT_ABSORB)
        elif raw_kinds[i] == EVENT_JUMP and values[i] > values[i - 1]:
            kinds.append(EVENT_JUMP)
        else:
            kinds.append(EVENT_STEP)
    return tuple(kinds)


def _check_absorption(values: np.ndarray, label: str) -> float:
    dead = np.nonzero(values == 0.0)[0]
    if not dead.size:
        return math.inf
    first = int(dead[0])
    if np.any(values[first:] != 0.0):
        raise InvariantBreach(f"{label}: path left 0 after absorption")
    return first


def _path_from_log(
    log: list[tuple], upper: bool, trace: BlockTrace, lane: int
) -> PathSample:
    times = np.array([row[0] for row in log])
    column = 2 if upper else 1
    values = np.array([row[column] for row in log])
    if np.any(values < 0.0):
        raise InvariantBreach("negative state in a simulated path")
    kinds = _label_events(values, [row[3] for row in log])
    first = _check_absorption(values, "upper path" if upper else "path")
    absorption = math.inf if math.isinf(first) else float(times[int(first)])

    jumps = []
    for i in range(1, len(log)):
        if log[i][3] == EVENT_JUMP and values[i] > values[i - 1]:
            jumps.append((float(times[i]), float(values[i] - values[i - 1])))
    hitting: dict[float, HitTimes] = {}
    if not upper:
        for level in trace.down:
            hitting[level] = HitTimes(
                down=float(trace.down[level][lane]),
                up=float(trace.up[level][lane]),
                exact=float(trace.exact[level][lane]),
            )
    return PathSample(
        times=times,
        values=values,
        events=kinds,
        absorption_time=absorption,
        hitting=hitting,
        jumps=tuple(jumps),
    )


def simulate_path(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    x0: float,
    cfg: SimConfig,
    levels: tuple[float, ...] = (),
) -> PathSample:
    """
    Simulate one path of the CBC equation from x0 up to the horizon.

    Args:
        mech: Branching mechanism
        g: Competition function
        x0: Initial state > 0
        cfg: Simulation settings; the path uses block 0 of (seed, stream)
        levels: Levels whose first passage times are recorded

    Returns:
        PathSample on the jump-adapted event grid
    """
    if not x0 > 0:
        raise PreconditionError(f"x0 must be > 0, got {x0}")
    require_nonexplosion(mech, g, cfg)
    scheme = JumpAdaptedEuler(mech, g, cfg, levels=levels)
    trace = scheme.run(
        np.array([float(x0)]), block_rng(cfg.seed, cfg.stream, 0), record_events=True
    )
    return _path_from_log(trace.logs[0], upper=False, trace=trace, lane=0)


@dataclass
class EnsembleResult:
    """Block traces of an ensemble, concatenated in path-index order."""

    blocks: list[BlockTrace]
    horizon: float

    @property
    def n_paths(self) -> int:
        return int(sum(b.final.size for b in self.blocks))

    @property
    def final(self) -> np.ndarray:
        return np.concatenate([b.final for b in self.blocks])

    @property
    def final_upper(self) -> np.ndarray:
        return np.concatenate([b.final_upper for b in self.blocks])

    @property
    def absorbed_at(self) -> np.ndarray:
        return np.concatenate([b.absorbed_at for b in self.blocks])

    def passage(self, kind: str, level: float) -> np.ndarray:
        """First passage times of ``level`` (``down``, ``up`` or ``exact``)."""
        tables = [getattr(b, kind)[float(level)] for b in self.blocks]
        return np.concatenate(tables)

    @property
    def grid_values(self) -> np.ndarray:
        return np.concatenate([b.grid_values for b in self.blocks], axis=0)

    @property
    def grid_upper(self) -> np.ndarray:
        return np.concatenate([b.grid_values + b.grid_gaps for b in self.blocks], axis=0)

    @property
    def restarts(self) -> int:
        return int(sum(b.restarts for b in self.blocks))

    @property
    def merges(self) -> np.ndarray:
        """Per-pair count of steps where a positive gap overshot 0 and was clamped."""
        return np.concatenate([b.merges for b in self.blocks])

    @property
    def violations(self) -> np.ndarray:
        """Per-pair count of steps where a merged pair split with the upper path below."""
        return np.concatenate([b.violations for b in self.blocks])

    def summary(self, estimator: str, statistic: Any) -> EnsembleSummary:
        """Pool per-block means of ``statistic(final_states)``."""
        parts = [
            EnsembleSummary.from_samples(estimator, statistic(b.final)) for b in self.blocks
        ]
        return combine_summaries(parts)


def _initial_states(x0: Union[float, np.ndarray], n_paths: int) -> np.ndarray:
    states = np.asarray(x0, dtype=float)
    if states.ndim == 0:
        states = np.full(n_paths, float(states))
    if states.size != n_paths:
        raise PreconditionError(f"need {n_paths} initial states, got {states.size}")
    if np.any(states <= 0):
        raise PreconditionError("initial states must be > 0")
    return states


def simulate_ensemble(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    x0: Union[float, np.ndarray],
    cfg: SimConfig,
    n_paths: int,
    levels: tuple[float, ...] = (),
    record_grid: bool = False,
    threads: Optional[int] = None,
) -> EnsembleResult:
    """
    Simulate ``n_paths`` independent paths in blocks.

    Path i lives in block i // B of (seed, stream), B being the configured
    block size, so the result does not depend on the thread count.
    """
    if n_paths < 1:
        raise PreconditionError(f"n_paths must be ≥ 1, got {n_paths}")
    require_nonexplosion(mech, g, cfg)
    states = _initial_states(x0, n_paths)
    chunk = get_config_manager().config.paths_per_block

    def task(block: int, size: int) -> BlockTrace:
        start = block * chunk
        scheme = JumpAdaptedEuler(mech, g, cfg, levels=levels)
        return scheme.run(
            states[start : start + size],
            block_rng(cfg.seed, cfg.stream, block),
            record_grid=record_grid,
        )

    blocks = run_chunked(task, n_paths, chunk_size=chunk, threads=threads)
    result = EnsembleResult(blocks=blocks, horizon=cfg.horizon)
    if result.restarts:
        logger.debug(f"simulate_ensemble: {result.restarts} thinning restarts")
    return result


@dataclass(frozen=True)
class CoupledPair:
    """
    Two paths driven by shared noise; ``upper`` starts at x1 ≥ x2.

    ``merges`` counts sub-steps where the positive gap overshot 0 and was set
    to 0. ``ordering_violations`` counts sub-steps where an already merged pair
    came out with the upper path below the lower one before the gap clamp.
    """

    upper: PathSample
    lower: PathSample
    merges: int = 0
    violations: int = 0

    @property
    def ordering_violations(self) -> int:
        return self.violations


def simulate_coupled_pair(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    x1: float,
    x2: float,
    cfg: SimConfig,
    g_lower: Optional[CompetitionFunction] = None,
) -> CoupledPair:
    """
    Simulate paths from x1 ≥ x2 > 0 on one event grid with shared noise.

    The upper path uses competition ``g``; the lower path uses ``g_lower``
    (defaults to ``g``). With g_lower ≥ g pointwise the lower path stays below;
    a merged pair splitting the other way raises InvariantBreach.
    """
    if not x1 >= x2 > 0:
        raise PreconditionError(f"need x1 ≥ x2 > 0, got x1={x1}, x2={x2}")
    require_nonexplosion(mech, g, cfg)
    scheme = JumpAdaptedEuler(mech, g, cfg, g_lower=g_lower)
    trace = scheme.run(
        np.array([float(x2)]),
        block_rng(cfg.seed, cfg.stream, 0),
        gap0=np.array([float(x1) - float(x2)]),
        record_events=True,
    )
    log = trace.logs[0]
    pair = CoupledPair(
        upper=_path_from_log(log, upper=True, trace=trace, lane=0),
        lower=_path_from_log(log, upper=False, trace=trace, lane=0),
        merges=int(trace.merges[0]),
        violations=int(trace.violations[0]),
    )
    if pair.ordering_violations:
        raise InvariantBreach(f"coupled pair ordering violated at {pair.ordering_violations} steps")
    return pair


@dataclass(frozen=True)
class CoupledEnsemble:
    """Grid values of many coupled pairs, with the per-pair merge and violation counts."""

    times: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    merges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    violations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def ordering_violations(self) -> int:
        return int(np.sum(self.violations))

    @property
    def merged_pairs(self) -> int:
        return int(np.count_nonzero(self.merges))


def simulate_coupled_ensemble(
    mech: BranchingMechanism,
    g: CompetitionFunction,
    x1: float,
    x2: float,
    cfg: SimConfig,
    n_paths: int,
    g_lower: Optional[CompetitionFunction] = None,
    threads: Optional[int] = None,
) -> CoupledEnsemble:
    """Many coupled pairs, returned as grid values."""
    if not x1 >= x2 > 0:
        raise PreconditionError(f"need x1 ≥ x2 > 0, got x1={x1}, x2={x2}")
    require_nonexplosion(mech, g, cfg)

    def task(block: int, size: int) -> BlockTrace:
        scheme = JumpAdaptedEuler(mech, g, cfg, g_lower=g_lower)
        return scheme.run(
            np.full(size, float(x2)),
            block_rng(cfg.seed, cfg.stream, block),
            gap0=np.full(size, float(x1) - float(x2)),
            record_grid=True,
        )

    blocks = run_chunked(task, n_paths, threads=threads)
    result = EnsembleResult(blocks=blocks, horizon=cfg.horizon)
    ensemble = CoupledEnsemble(
        times=blocks[0].times,
        upper=result.grid_upper,
        lower=result.grid_values,
        merges=result.merges,
        violations=result.violations,
    )
    if ensemble.ordering_violations:
        raise InvariantBreach(
            f"{ensemble.ordering_violations} ordering violations across {n_paths} pairs"
        )
    return ensemble


def with_horizon(cfg: SimConfig, horizon: float, stream: Optional[int] = None) -> SimConfig:
    """Copy of ``cfg`` with a new horizon (and optionally a new stream)."""
    return replace(cfg, horizon=horizon, stream=cfg.stream if stream is None else stream)
