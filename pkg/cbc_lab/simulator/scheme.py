"""
Jump-adapted Euler scheme for the CBC equation, vectorised over a block of paths.

Between jump epochs the drift -(bY + g(Y) + m_ε Y) is integrated with a
Runge-Kutta step and a Gaussian increment of variance (2c + σ²_ε)·Y per unit
time is added, where
m_ε = ∫_ε^1 z μ(dz) and σ²_ε = ∫_0^ε z² μ(dz). Jumps larger than ε arrive at
rate Y·μ(ε, ∞); candidates are drawn against a dominating rate fixed at the
start of each step and thinned by the current state. A candidate seen with the
state above the dominating level restarts the step with a doubled bound; after
the restart budget the step is split in two halves.

In pair mode the lower path Y and the gap Z = U - Y ≥ 0 to the upper path U
share noise: Y uses the common Gaussian increment, Z gets an independent one
of variance (2c + σ²_ε)·Z, and Poisson marks below Y move both paths while
marks in (Y, U] move only U.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config.constants import MAX_HALVINGS, RESTART_BUDGET, THINNING_HEADROOM
from ..core.errors import NumericalFailure
from ..core.interfaces import CompetitionFunction
from ..mechanism.branching import BranchingMechanism
from .config import SimConfig


logger = logging.getLogger(__name__)

EVENT_STEP = "step"
EVENT_JUMP = "jump"
EVENT_ABSORB = "absorb"


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    """Counter-based generator for block ``block`` of stream ``stream``."""
    sequence = np.random.SeedSequence(seed, spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass
class _Event:
    """States of some lanes right after a sub-step or a jump."""

    lanes: np.ndarray
    t: np.ndarray
    before: np.ndarray
    after: np.ndarray
    gap_before: Optional[np.ndarray]
    gap_after: Optional[np.ndarray]
    kind: str
    logged: bool
    sizes: Optional[np.ndarray] = None
    raw_gap: Optional[np.ndarray] = None


@dataclass
class BlockTrace:
    """Everything a block run records about its lanes."""

    times: np.ndarray
    final: np.ndarray
    final_gap: Optional[np.ndarray]
    absorbed_at: np.ndarray
    upper_absorbed_at: Optional[np.ndarray]
    down: dict[float, np.ndarray]
    up: dict[float, np.ndarray]
    exact: dict[float, np.ndarray]
    grid_values: Optional[np.ndarray] = None
    grid_gaps: Optional[np.ndarray] = None
    logs: Optional[list[list[tuple]]] = None
    restarts: int = 0
    halvings: int = 0
    merges: Optional[np.ndarray] = None
    violations: Optional[np.ndarray] = None

    @property
    def final_upper(self) -> Optional[np.ndarray]:
        return None if self.final_gap is None else self.final + self.final_gap


@dataclass
class _LaneState:
    y: np.ndarray
    z: Optional[np.ndarray]
    absorbed: np.ndarray
    absorbed_upper: Optional[np.ndarray]
    down: dict[float, np.ndarray] = field(default_factory=dict)
    up: dict[float, np.ndarray] = field(default_factory=dict)
    exact: dict[float, np.ndarray] = field(default_factory=dict)
    logs: Optional[list[list[tuple]]] = None
    merges: Optional[np.ndarray] = None
    violations: Optional[np.ndarray] = None


class JumpAdaptedEuler:
    """The scheme for one (mechanism, competition, settings) triple."""

    def __init__(
        self,
        mech: BranchingMechanism,
        g: CompetitionFunction,
        cfg: SimConfig,
        g_lower: Optional[CompetitionFunction] = None,
        levels: tuple[float, ...] = (),
    ):
        self.mech = mech
        self.g = g
        self.g_lower = g_lower if g_lower is not None else g
        self.cfg = cfg
        self.levels = tuple(float(level) for level in levels)
        mu = mech.mu
        self.rate = 0.0 if mu.kind == "zero" else float(mu.jump_rate(cfg.eps))
        self.compensator = 0.0 if mu.kind == "zero" else float(mu.compensator_mean(cfg.eps))
        small = 0.0 if mu.kind == "zero" else float(mu.small_variance(cfg.eps))
        self.variance = 2.0 * mech.c + small
        self.floor = cfg.dt * 2.0**-MAX_HALVINGS
        self.restarts = 0
        self.halvings = 0
        logger.debug(
            f"scheme: ν_ε={self.rate:.6g}, m_ε={self.compensator:.6g}, "
            f"variance coefficient {self.variance:.6g}"
        )

    def _drift(self, y: np.ndarray, g: CompetitionFunction) -> np.ndarray:
        return -(self.mech.b * y + np.asarray(g(np.maximum(y, 0.0)), dtype=float) + self.compensator * y)

    def _drift_flow(
        self, y: np.ndarray, delta: np.ndarray, g: CompetitionFunction
    ) -> np.ndarray:
        """Classical Runge-Kutta step of dy = drift(y) dt."""
        k1 = self._drift(y, g)
        k2 = self._drift(y + 0.5 * delta * k1, g)
        k3 = self._drift(y + 0.5 * delta * k2, g)
        k4 = self._drift(y + delta * k3, g)
        return y + delta * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    def _euler(
        self,
        y: np.ndarray,
        z: Optional[np.ndarray],
        sel: np.ndarray,
        delta: np.ndarray,
        rng: np.random.Generator,
        lanes: np.ndarray,
        t_end: np.ndarray,
        events: list[_Event],
        logged: bool,
    ) -> None:
        ys = y[sel]
        xi = rng.standard_normal(sel.size)
        shock = np.sqrt(self.variance * ys * delta) * xi
        moved = self._drift_flow(ys, delta, self.g_lower) + shock
        lower = np.where(moved <= self.cfg.absorption_tol, 0.0, moved)
        gap_before = gap_after = raw_gap = None
        if z is not None:
            zs = z[sel]
            xi_gap = rng.standard_normal(sel.size)
            upper = (
                self._drift_flow(ys + zs, delta, self.g)
                + shock
                + np.sqrt(self.variance * zs * delta) * xi_gap
            )
            upper = np.where(upper <= self.cfg.absorption_tol, 0.0, upper)
            # Only the gap is clamped; a negative raw gap is recorded in _commit
            raw_gap = upper - lower
            gap_before = zs
            gap_after = np.maximum(raw_gap, 0.0)
            z[sel] = gap_after
        y[sel] = lower
        events.append(
            _Event(
                lanes[sel], t_end, ys, lower, gap_before, gap_after, EVENT_STEP, logged,
                raw_gap=raw_gap,
            )
        )

    def _attempt(
        self,
        st: _LaneState,
        lanes: np.ndarray,
        t0: float,
        h: float,
        factor: np.ndarray,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """One try at advancing ``lanes`` over [t0, t0 + h]; returns the success mask."""
        pair = st.z is not None
        y = st.y[lanes].copy()
        z = st.z[lanes].copy() if pair else None
        n = lanes.size
        ok = np.ones(n, dtype=bool)
        clock = np.zeros(n)
        events: list[_Event] = []

        kmax = 0
        if self.rate > 0.0:
            top = y + z if pair else y
            level = factor * top
            counts = rng.poisson(self.rate * level * h)
            kmax = int(counts.max()) if n else 0
        if kmax:
            marks = rng.random((n, kmax))
            marks[np.arange(kmax)[None, :] >= counts[:, None]] = np.inf
            epochs = np.sort(marks, axis=1) * h
            for r in range(kmax):
                sel = np.nonzero((counts > r) & ok)[0]
                if not sel.size:
                    continue
                self._euler(
                    y, z, sel, epochs[sel, r] - clock[sel], rng, lanes,
                    t0 + epochs[sel, r], events, logged=False,
                )
                clock[sel] = epochs[sel, r]
                top = y[sel] + z[sel] if pair else y[sel]
                exceeded = top > level[sel]
                ok[sel[exceeded]] = False
                sel = sel[~exceeded]
                if not sel.size:
                    continue
                u = rng.random(sel.size) * level[sel]
                both = u < y[sel]
                hit = both | (u < y[sel] + z[sel]) if pair else both
                jumpers = sel[hit]
                if not jumpers.size:
                    continue
                sizes = self.mech.mu.sample_jumps(rng, self.cfg.eps, jumpers.size)
                before = y[jumpers].copy()
                gap_before = z[jumpers].copy() if pair else None
                moves_lower = both[hit]
                y[jumpers] = before + np.where(moves_lower, sizes, 0.0)
                if pair:
                    z[jumpers] = gap_before + np.where(moves_lower, 0.0, sizes)
                events.append(
                    _Event(
                        lanes[jumpers], t0 + epochs[jumpers, r], before, y[jumpers].copy(),
                        gap_before, z[jumpers].copy() if pair else None,
                        EVENT_JUMP, True, sizes,
                    )
                )

        sel = np.nonzero(ok)[0]
        if sel.size:
            self._euler(
                y, z, sel, h - clock[sel], rng, lanes,
                np.full(sel.size, t0 + h), events, logged=True,
            )
        self._commit(st, lanes, ok, y, z, events)
        return ok

    def _commit(
        self,
        st: _LaneState,
        lanes: np.ndarray,
        ok: np.ndarray,
        y: np.ndarray,
        z: Optional[np.ndarray],
        events: list[_Event],
    ) -> None:
        if not np.all(np.isfinite(y[ok])):
            raise NumericalFailure("state overflow during simulation; is the process explosive?")
        st.y[lanes[ok]] = y[ok]
        if z is not None:
            st.z[lanes[ok]] = z[ok]
        if not events:
            return
        good = np.zeros(st.y.size, dtype=bool)
        good[lanes[ok]] = True
        for ev in events:
            keep = good[ev.lanes]
            if not np.any(keep):
                continue
            lanes_k = ev.lanes[keep]
            t = ev.t[keep]
            before = ev.before[keep]
            after = ev.after[keep]
            died = (before > 0.0) & (after == 0.0)
            first = died & np.isinf(st.absorbed[lanes_k])
            st.absorbed[lanes_k[first]] = t[first]
            if ev.gap_after is not None:
                up_before = before + ev.gap_before[keep]
                up_after = after + ev.gap_after[keep]
                dead = (up_before > 0.0) & (up_after == 0.0)
                first_up = dead & np.isinf(st.absorbed_upper[lanes_k])
                st.absorbed_upper[lanes_k[first_up]] = t[first_up]
            if ev.raw_gap is not None:
                crossed = ev.raw_gap[keep] < 0.0
                merged = ev.gap_before[keep] > 0.0
                # A positive gap overshooting 0 is the pair merging; a merged pair
                # splitting downwards breaks the comparison
                st.merges[lanes_k] += crossed & merged
                st.violations[lanes_k] += crossed & ~merged
            for level in self.levels:
                for table, hit in (
                    (st.down[level], after <= level),
                    (st.up[level], after >= level),
                ):
                    new = hit & np.isinf(table[lanes_k])
                    table[lanes_k[new]] = t[new]
                if ev.kind == EVENT_STEP:
                    crossed = (before - level) * (after - level) <= 0.0
                    new = crossed & np.isinf(st.exact[level][lanes_k])
                    st.exact[level][lanes_k[new]] = t[new]
            if st.logs is not None and ev.logged:
                sizes = ev.sizes[keep] if ev.sizes is not None else None
                gaps = ev.gap_after[keep] if ev.gap_after is not None else None
                for i, lane in enumerate(lanes_k):
                    kind = EVENT_ABSORB if died[i] else ev.kind
                    st.logs[lane].append(
                        (
                            float(t[i]),
                            float(after[i]),
                            None if gaps is None else float(after[i] + gaps[i]),
                            kind,
                            None if sizes is None else float(sizes[i]),
                        )
                    )

    def _advance(
        self,
        st: _LaneState,
        idx: np.ndarray,
        t0: float,
        h: float,
        rng: np.random.Generator,
    ) -> None:
        factor = np.full(idx.size, 1.0 + THINNING_HEADROOM)
        tries = np.zeros(idx.size, dtype=int)
        pending = np.arange(idx.size)
        while pending.size:
            ok = self._attempt(st, idx[pending], t0, h, factor[pending], rng)
            failed = pending[~ok]
            if not failed.size:
                break
            self.restarts += failed.size
            factor[failed] *= 2.0
            tries[failed] += 1
            over = failed[tries[failed] > RESTART_BUDGET]
            pending = failed[tries[failed] <= RESTART_BUDGET]
            if over.size:
                half = 0.5 * h
                if half < self.floor:
                    raise NumericalFailure(
                        f"step halving reached Δt·2^-{MAX_HALVINGS} at t={t0} "
                        f"without a valid dominating rate"
                    )
                self.halvings += over.size
                logger.debug(f"halving step at t={t0} for {over.size} paths")
                self._advance(st, idx[over], t0, half, rng)
                self._advance(st, idx[over], t0 + half, half, rng)

    def _alive(self, st: _LaneState) -> np.ndarray:
        if st.z is None:
            return np.nonzero(st.y > 0.0)[0]
        return np.nonzero((st.y > 0.0) | (st.z > 0.0))[0]

    def run(
        self,
        x0: np.ndarray,
        rng: np.random.Generator,
        gap0: Optional[np.ndarray] = None,
        record_grid: bool = False,
        record_events: bool = False,
    ) -> BlockTrace:
        """
        Advance every lane from its initial state to the horizon.

        Args:
            x0: Initial states (lower path in pair mode)
            rng: Block generator
            gap0: Initial gaps U - Y (enables pair mode)
            record_grid: Keep the state at every grid time
            record_events: Keep a per-lane event log (t, y, u, kind, jump size)

        Returns:
            BlockTrace for the block
        """
        y = np.asarray(x0, dtype=float).copy()
        z = None if gap0 is None else np.asarray(gap0, dtype=float).copy()
        n = y.size
        st = _LaneState(
            y=y,
            z=z,
            absorbed=np.where(y <= 0.0, 0.0, np.inf),
            absorbed_upper=None if z is None else np.where(y + z <= 0.0, 0.0, np.inf),
            logs=[[] for _ in range(n)] if record_events else None,
            merges=None if z is None else np.zeros(n, dtype=int),
            violations=None if z is None else np.zeros(n, dtype=int),
        )
        for level in self.levels:
            st.down[level] = np.where(y <= level, 0.0, np.inf)
            st.up[level] = np.where(y >= level, 0.0, np.inf)
            st.exact[level] = np.where(y == level, 0.0, np.inf)
        if st.logs is not None:
            for lane in range(n):
                upper = None if z is None else float(y[lane] + z[lane])
                st.logs[lane].append((0.0, float(y[lane]), upper, EVENT_STEP, None))

        times = np.asarray(self.cfg.grid())
        grid_values = np.empty((n, times.size)) if record_grid else None
        grid_gaps = np.empty((n, times.size)) if record_grid and z is not None else None
        if grid_values is not None:
            grid_values[:, 0] = y
        if grid_gaps is not None:
            grid_gaps[:, 0] = z

        for k in range(times.size - 1):
            t0, t1 = float(times[k]), float(times[k + 1])
            alive = self._alive(st)
            if alive.size:
                self._advance(st, alive, t0, t1 - t0, rng)
            if st.logs is not None:
                dead = np.setdiff1d(np.arange(n), alive)
                for lane in dead:
                    upper = None if z is None else float(st.y[lane] + st.z[lane])
                    st.logs[lane].append((t1, float(st.y[lane]), upper, EVENT_STEP, None))
            if grid_values is not None:
                grid_values[:, k + 1] = st.y
            if grid_gaps is not None:
                grid_gaps[:, k + 1] = st.z

        return BlockTrace(
            times=times,
            final=st.y,
            final_gap=st.z,
            absorbed_at=st.absorbed,
            upper_absorbed_at=st.absorbed_upper,
            down=st.down,
            up=st.up,
            exact=st.exact,
            grid_values=grid_values,
            grid_gaps=grid_gaps,
            logs=st.logs,
            restarts=self.restarts,
            halvings=self.halvings,
            merges=st.merges,
            violations=st.violations,
        )
