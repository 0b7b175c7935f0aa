"""Tests for cbc_lab.lamperti module."""

import math

import numpy as np
import pytest

from cbc_lab.core.errors import PreconditionError
from cbc_lab.lamperti import (
    LevyPath,
    crossvalidate,
    hitting_positivity_probe,
    simulate_levy,
    time_change,
)
from cbc_lab.mechanism import feller
from cbc_lab.simulator import SimConfig


class TestLevyPath:
    """Test the Lévy path container and simulator."""

    def test_single_row(self):
        """Test that one-dimensional values become a single path."""
        path = LevyPath(times=np.array([0.0, 1.0, 2.0]), values=np.array([1.0, 0.5, 0.25]))
        assert path.n_paths == 1
        assert path.values.shape == (1, 3)
        assert np.array_equal(path.path(0), [1.0, 0.5, 0.25])
        assert path.value_at(1.5)[0] == 0.5
        assert path.rows()[1] == (1.0, 0.5, "step")

    def test_pure_drift(self):
        """Test N_t = x0 - bt for a drift-only mechanism."""
        cfg = SimConfig(dt=0.1, horizon=1.0, seed=3)
        path = simulate_levy(feller(c=0.0, b=1.0), 2.0, cfg, n_paths=3)
        assert path.n_paths == 3
        assert path.final == pytest.approx(np.full(3, 1.0))
        assert path.path(1) == pytest.approx(2.0 - path.times)

    def test_brownian_moments(self, feller_mech, sim_cfg):
        """Test mean x0 and variance 2ct for the Feller Lévy process."""
        path = simulate_levy(feller_mech, 1.0, sim_cfg, n_paths=2000)
        final = path.final
        assert abs(final.mean() - 1.0) < 4.0 * math.sqrt(2.0 / 2000)
        assert final.var(ddof=1) == pytest.approx(2.0, rel=0.15)

    def test_reproducible(self, truncated_stable_mech, sim_cfg):
        """Test that the seed fixes the paths."""
        first = simulate_levy(truncated_stable_mech, 1.0, sim_cfg, n_paths=5)
        second = simulate_levy(truncated_stable_mech, 1.0, sim_cfg, n_paths=5)
        assert np.array_equal(first.values, second.values)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("t", [0.25, 1.0])
    def test_laplace_exponent_feller(self, lam, t):
        """Test E e^{-λN_t} = e^{-λx + Ψ(λ)t} within 3 SE for a drifted Feller mechanism."""
        mech = feller(c=0.25, b=0.5)
        cfg = SimConfig(dt=0.05, horizon=t, seed=13)
        sample = np.exp(-lam * simulate_levy(mech, 1.0, cfg, n_paths=20000).final)
        expected = math.exp(-lam + mech.psi(lam) * t)
        se = sample.std(ddof=1) / math.sqrt(sample.size)
        assert abs(sample.mean() - expected) < 3.0 * se

    @pytest.mark.slow
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("t", [0.25, 1.0])
    def test_laplace_exponent_jumps(self, truncated_stable_mech, lam, t):
        """Test the Laplace identity for the truncated stable mechanism."""
        cfg = SimConfig(dt=0.05, eps=0.02, horizon=t, seed=17)
        sample = np.exp(-lam * simulate_levy(truncated_stable_mech, 1.0, cfg, n_paths=5000).final)
        expected = math.exp(-lam + truncated_stable_mech.psi(lam) * t)
        se = sample.std(ddof=1) / math.sqrt(sample.size)
        assert abs(sample.mean() - expected) < 3.0 * se

    def test_invalid_count(self, feller_mech, sim_cfg):
        """Test n_paths ≥ 1."""
        with pytest.raises(PreconditionError):
            simulate_levy(feller_mech, 1.0, sim_cfg, n_paths=0)


class TestTimeChange:
    """Test the η clock."""

    def test_hand_computed_clock(self):
        """Test a stopped path cut inside its last cell."""
        path = LevyPath(times=np.array([0.0, 1.0, 2.0, 3.0]), values=np.array([2.0, 1.0, 0.5, -1.0]))
        change = time_change(path, 0.75)

        first = math.log(2.0)
        second = 0.5 * math.log(1.0 / 0.75) / 0.25
        assert change.stopped
        assert change.stop_time == pytest.approx(1.5)
        assert change.times == pytest.approx([0.0, 1.0, 1.5])
        assert change.clock == pytest.approx([0.0, first, first + second])
        assert change.eta(1.0) == pytest.approx(first)
        assert change.eta(0.5) == pytest.approx(math.log(2.0 / 1.5))
        assert change.inverse(first) == pytest.approx(1.0)
        assert change.inverse(0.375) == pytest.approx(2.0 - 2.0 * math.exp(-0.375))
        assert change.value_on_clock(0.375) == pytest.approx(2.0 * math.exp(-0.375))
        assert change.value_on_clock(2.0) == 0.0

    def test_absorbed_cell_clock_stays_bounded(self):
        """Test that a cell ending at ε adds ∫ ds/N along the line, not a 1/ε end point."""
        path = LevyPath(times=np.array([0.0, 0.01]), values=np.array([0.1, -0.1]))
        change = time_change(path, 1e-3)

        span = 0.01 * (0.1 - 1e-3) / 0.2
        assert change.total == pytest.approx(span * math.log(0.1 / 1e-3) / (0.1 - 1e-3))
        assert change.total < 0.5 * span * (1.0 / 0.1 + 1.0 / 1e-3)

    @pytest.mark.parametrize("eps", [0.05, 0.2, 0.5])
    def test_clock_bound(self, feller_mech, eps):
        """Test T ≤ S/ε per path and a strictly increasing clock."""
        cfg = SimConfig(dt=0.01, horizon=2.0, seed=21)
        paths = simulate_levy(feller_mech, 1.0, cfg, n_paths=200)
        for i in range(paths.n_paths):
            change = time_change(paths, eps, i)
            elapsed = change.stop_time if change.stopped else change.times[-1]
            assert change.total <= elapsed / eps + 1e-12
            assert np.all(np.diff(change.clock) > 0)

    def test_inverse_round_trip(self, feller_mech):
        """Test η⁻¹(η(t)) = t on and between grid points."""
        cfg = SimConfig(dt=0.01, horizon=1.0, seed=5)
        change = time_change(simulate_levy(feller_mech, 3.0, cfg), 0.1)
        end = change.times[-1]
        for t in np.linspace(0.0, end, 37)[1:-1]:
            assert change.inverse(change.eta(t)) == pytest.approx(t, abs=1e-9)

    def test_unstopped_path(self):
        """Test a path that stays above ε."""
        path = LevyPath(times=np.array([0.0, 1.0, 2.0]), values=np.array([2.0, 2.0, 2.0]))
        change = time_change(path, 0.5)

        assert not change.stopped
        assert change.stop_time == math.inf
        assert change.clock == pytest.approx([0.0, 0.5, 1.0])
        assert math.isnan(change.value_on_clock(1.5))

    def test_linear_decay(self):
        """Test η(s) = -log(1 - s) for N_s = 1 - s, stopped at 1/2."""
        cfg = SimConfig(dt=0.01, horizon=1.0, seed=0)
        path = simulate_levy(feller(c=0.0, b=1.0), 1.0, cfg)
        change = time_change(path, 0.5)
        assert change.stop_time == pytest.approx(0.5, abs=1e-9)
        assert change.total == pytest.approx(math.log(2.0), rel=1e-9)

    def test_preconditions(self):
        """Test ε ≥ 0 and a start above ε."""
        path = LevyPath(times=np.array([0.0, 1.0]), values=np.array([1.0, 0.5]))
        with pytest.raises(PreconditionError):
            time_change(path, -0.1)
        with pytest.raises(PreconditionError, match="start above"):
            time_change(path, 1.0)


class TestCrossValidation:
    """Test the Lamperti cross-validation."""

    def test_time_zero(self, feller_mech, sim_cfg):
        """Test the trivial comparison at t_probe = 0."""
        report = crossvalidate(feller_mech, 2.0, 0.0, 100, sim_cfg)
        assert report.ks_stat == 0.0
        assert report.p_value == 1.0
        assert report.eps == pytest.approx(2e-3)
        assert report.to_dict()["t_probe"] == 0.0

    def test_preconditions(self, feller_mech, sim_cfg):
        """Test x0 > 0 and t_probe ≥ 0."""
        with pytest.raises(PreconditionError):
            crossvalidate(feller_mech, 0.0, 1.0, 10, sim_cfg)
        with pytest.raises(PreconditionError):
            crossvalidate(feller_mech, 1.0, -1.0, 10, sim_cfg)

    @pytest.mark.slow
    def test_feller_agreement(self, feller_mech, sim_cfg):
        """Test that both constructions give close laws at t = 0.5."""
        report = crossvalidate(feller_mech, 1.0, 0.5, 2000, sim_cfg, eps=0.01)
        assert report.n > 1500
        assert report.ks_stat < 0.1

    @pytest.mark.slow
    def test_feller_reference_example(self, feller_mech):
        """Test x0 = 1, t = 0.5, ε = 1e-3 and 10⁴ paths, with P(X_t = 0) = e^{-x/(ct)}."""
        cfg = SimConfig(dt=0.001, eps=0.01, horizon=1.0, seed=31)
        report = crossvalidate(feller_mech, 1.0, 0.5, 10_000, cfg, eps=1e-3)
        assert report.unfinished == 0
        assert report.p_value > 0.01
        assert report.absorbed_fraction == pytest.approx(math.exp(-2.0), abs=0.03)

    @pytest.mark.slow
    def test_truncated_stable_example(self, truncated_stable_mech):
        """Test the jump case at t = 0.3."""
        cfg = SimConfig(dt=0.005, eps=0.02, horizon=1.0, seed=37)
        report = crossvalidate(truncated_stable_mech, 1.0, 0.3, 2000, cfg)
        assert report.n > 1900
        assert report.p_value > 0.01


class TestPositivityProbe:
    """Test the hitting-time positivity probe."""

    def test_preconditions(self, feller_mech, sim_cfg):
        """Test x > ε ≥ 0, z > x and t > 0."""
        with pytest.raises(PreconditionError):
            hitting_positivity_probe(feller_mech, 0.1, None, 0.1, 1.0, 10, sim_cfg)
        with pytest.raises(PreconditionError, match="z > x"):
            hitting_positivity_probe(feller_mech, 1.0, 0.5, 0.1, 1.0, 10, sim_cfg)
        with pytest.raises(PreconditionError):
            hitting_positivity_probe(feller_mech, 1.0, None, 0.1, 0.0, 10, sim_cfg)

    def test_without_upcrossing(self, feller_mech, sim_cfg):
        """Test that only the down events are reported without z."""
        probe = hitting_positivity_probe(feller_mech, 1.0, None, 0.1, 0.5, 50, sim_cfg)
        assert [f.event for f in probe.frequencies] == ["S_down", "T_down"]
        assert probe.get("S_down").n == 50
        with pytest.raises(KeyError):
            probe.get("S_up")

    @pytest.mark.slow
    def test_feller_events_positive(self, feller_mech, sim_cfg):
        """Test that all four events have positive Wilson lower bounds."""
        probe = hitting_positivity_probe(feller_mech, 1.0, 2.0, 0.1, 1.0, 500, sim_cfg)
        assert [f.event for f in probe.frequencies] == ["S_down", "S_up", "T_down", "T_up"]
        for event in ("S_down", "S_up", "T_down", "T_up"):
            assert probe.get(event).positive
        assert probe.to_dict()["z"] == 2.0
