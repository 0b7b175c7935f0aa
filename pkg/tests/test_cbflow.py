"""Tests for cbc_lab.cbflow module."""

import math

import pytest

from cbc_lab.cbflow import (
    extinction_prob,
    extinction_profile,
    flow_value,
    laplace_transform,
    reciprocal_tail,
    solve_v,
    vbar,
)
from cbc_lab.core.errors import PreconditionError
from cbc_lab.mechanism import feller


EULER_GAMMA = 0.5772156649015329


class TestFlow:
    """Test the flow ODE against closed-form solutions."""

    def test_feller_flow(self, feller_mech):
        """Test v_t(λ) = λ/(1 + λt) for Ψ(λ) = λ²."""
        solution = solve_v(feller_mech, 1.0, 1.0)

        assert solution.final == pytest.approx(0.5, rel=1e-6)
        assert solution.t_max == pytest.approx(1.0)
        assert solution.value_at(0.0) == 1.0
        assert solution.value_at(0.5) == pytest.approx(1.0 / 1.5, rel=1e-6)
        assert solution.blow_up is False
        assert solution.rows()[0] == (0.0, 1.0)

    def test_local_error_estimate(self, feller_mech):
        """Test that the reported local error is the solver's own estimate, within its tolerance."""
        solution = solve_v(feller_mech, 1.0, 1.0, rtol=1e-6)

        assert 0.0 < solution.max_local_error <= 1e-6 + 1e-14
        assert abs(solution.final - 0.5) <= solution.steps * solution.max_local_error

    @pytest.mark.parametrize("mech_name", ["feller_mech", "neveu_mech", "truncated_stable_mech", "pure_stable_mech"])
    @pytest.mark.parametrize("lam", [0.1, 0.5, 1.0, 2.0, 5.0])
    @pytest.mark.parametrize("t", [0.1, 0.25, 0.5, 1.0, 2.0])
    def test_semigroup_property(self, request, mech_name, lam, t):
        """Test v_{t+s}(λ) = v_t(v_s(λ)) over a grid of s."""
        mech = request.getfixturevalue(mech_name)
        for s in (0.1, 0.25, 0.5, 1.0, 2.0):
            composed = flow_value(mech, flow_value(mech, lam, s), t)
            assert composed == pytest.approx(flow_value(mech, lam, t + s), rel=1e-7)

    def test_stable_flow(self, pure_stable_mech):
        """Test v_t(λ) = (λ^{-1/2} + t/2)^{-2} for Ψ(λ) = λ^{3/2}."""
        assert flow_value(pure_stable_mech, 1.0, 2.0) == pytest.approx(0.25, rel=1e-5)

    def test_neveu_flow(self, neveu_mech):
        """Test the explicit Neveu flow log v_t = e^{-t}(log λ + γ - 1) - (γ - 1)."""
        expected = math.exp((EULER_GAMMA - 1.0) * (math.exp(-1.0) - 1.0))
        assert flow_value(neveu_mech, 1.0, 1.0) == pytest.approx(expected, rel=1e-5)

    def test_flow_preconditions(self, feller_mech):
        """Test λ > 0 and t_max > 0."""
        with pytest.raises(PreconditionError):
            solve_v(feller_mech, 0.0, 1.0)
        with pytest.raises(PreconditionError):
            solve_v(feller_mech, 1.0, 0.0)
        solution = solve_v(feller_mech, 1.0, 1.0)
        with pytest.raises(PreconditionError, match="outside"):
            solution.value_at(2.0)

    def test_flow_at_time_zero(self, feller_mech):
        """Test v_0(λ) = λ."""
        assert flow_value(feller_mech, 3.0, 0.0) == 3.0


class TestLaplaceTransform:
    """Test E_x[e^{-λY_t}]."""

    def test_feller_laplace(self, feller_mech):
        """Test exp(-x v_t(λ)) for the Feller diffusion."""
        assert laplace_transform(feller_mech, 1.0, 1.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-6)

    def test_trivial_arguments(self, feller_mech):
        """Test x = 0, λ = 0 and t = 0."""
        assert laplace_transform(feller_mech, 0.0, 1.0, 1.0) == 1.0
        assert laplace_transform(feller_mech, 1.0, 0.0, 1.0) == 1.0
        assert laplace_transform(feller_mech, 2.0, 1.5, 0.0) == pytest.approx(math.exp(-3.0))

    def test_negative_arguments(self, feller_mech):
        """Test that negative inputs are rejected."""
        with pytest.raises(PreconditionError):
            laplace_transform(feller_mech, -1.0, 1.0, 1.0)
        with pytest.raises(PreconditionError):
            laplace_transform(feller_mech, 1.0, 1.0, -1.0)


class TestExtinction:
    """Test the extinction boundary and extinction probabilities."""

    def test_feller_vbar(self, feller_mech):
        """Test v̄_t = 1/t for Ψ(λ) = λ²."""
        entry = vbar(feller_mech, 2.0)
        assert entry.finite
        assert entry.value == pytest.approx(0.5, rel=1e-6)

    def test_stable_vbar(self, pure_stable_mech):
        """Test v̄_t = 4/t² for Ψ(λ) = λ^{3/2}."""
        assert vbar(pure_stable_mech, 1.0).value == pytest.approx(4.0, rel=1e-5)

    def test_reciprocal_tail(self, feller_mech):
        """Test G(v) = 1/v for Ψ(λ) = λ²."""
        assert reciprocal_tail(feller_mech, 0.25) == pytest.approx(4.0, rel=1e-6)

    def test_extinction_probability(self, feller_mech):
        """Test P_x(τ ≤ t) = exp(-x/t) for the Feller diffusion."""
        assert extinction_prob(feller_mech, 2.0, 2.0) == pytest.approx(math.exp(-1.0), rel=1e-6)
        assert extinction_prob(feller_mech, 0.0, 1.0) == 1.0
        with pytest.raises(PreconditionError):
            extinction_prob(feller_mech, -1.0, 1.0)

    def test_vbar_without_grey(self, neveu_mech):
        """Test that v̄_t is infinite when Grey's condition fails."""
        entry = vbar(neveu_mech, 1.0)
        assert entry.value is None
        assert not entry.finite
        with pytest.raises(PreconditionError, match="Grey"):
            extinction_prob(neveu_mech, 1.0, 1.0)

    def test_vbar_rejects_nonpositive_time(self, feller_mech):
        """Test t > 0."""
        with pytest.raises(PreconditionError):
            vbar(feller_mech, 0.0)

    def test_extinction_profile(self, feller_mech, neveu_mech):
        """Test the profile rows over a time grid."""
        rows = extinction_profile(feller_mech, [1.0, 2.0, 4.0]).rows()
        assert [r[0] for r in rows] == [1.0, 2.0, 4.0]
        for t, value, finite in rows:
            assert finite
            assert value == pytest.approx(1.0 / t, rel=1e-6)

        neveu_rows = extinction_profile(neveu_mech, [1.0]).rows()
        assert neveu_rows == [(1.0, math.inf, False)]

    def test_vbar_decreasing(self):
        """Test that v̄_t decreases in t for a subcritical Feller diffusion."""
        mech = feller(c=1.0, b=0.5)
        values = [vbar(mech, t).value for t in (0.5, 1.0, 2.0)]
        assert values[0] > values[1] > values[2] > 0
