"""Tests for cbc_lab.executors package."""

import json
import math

import pytest

from cbc_lab.core.errors import ConfigError
from cbc_lab.executors.factories import ExecutorFactory
from cbc_lab.services.workspace import validate_config


FELLER = {"mechanism.kind": "feller", "mechanism.c": 1.0}
SMALL_RUN = {"seed": 11, "params.dt": 0.05, "params.horizon": 0.5, "params.n_paths": 40}


def run(kind: str, tmp_path, **values):
    config = validate_config(values={"experiment": kind, **FELLER, **values})
    executor = ExecutorFactory().create_executor(kind)
    return executor.execute(config, tmp_path)


def load(tmp_path, name: str) -> dict:
    return json.loads((tmp_path / name).read_text())


class TestExecutorFactory:
    """Test executor registration."""

    def test_supported_experiments(self):
        """Test that every experiment kind has an executor."""
        factory = ExecutorFactory()
        kinds = factory.get_supported_experiments()
        assert len(kinds) == 9
        for kind in kinds:
            executor = factory.create_executor(kind)
            assert executor.name == kind

    def test_unknown_kind(self):
        """Test that unknown kinds give None."""
        assert ExecutorFactory().create_executor("teleport") is None

    def test_stochastic_flags(self):
        """Test which executors need a seed."""
        factory = ExecutorFactory()
        stochastic = {k for k in factory.get_supported_experiments() if factory.create_executor(k).stochastic}
        assert stochastic == {"simulate", "couple", "lamperti", "qsd", "rate"}


class TestAnalyticExecutors:
    """Test the deterministic pipelines on the Feller diffusion."""

    def test_conditions(self, tmp_path):
        """Test the conditions report."""
        outcome = run("conditions", tmp_path, **{"competition.kind": "logistic"})

        assert outcome.success
        data = load(tmp_path, "conditions.json")
        assert data["criticality"] == "critical"
        assert len(data["reports"]) == 5
        assert outcome.summary["verdicts"]["grey"] == "satisfied"
        assert "[SATISFIED] grey" in outcome.details

    def test_conditions_with_alpha(self, tmp_path):
        """Test that α adds the QSD hypotheses report."""
        outcome = run("conditions", tmp_path, **{"competition.kind": "logistic", "params.alpha": 1.5})
        assert outcome.summary["verdicts"]["qsd_hypotheses"] == "satisfied"

    def test_flow(self, tmp_path):
        """Test v_1(1) = 1/2 and the extinction probability e^{-1}."""
        outcome = run("flow", tmp_path)

        assert outcome.success
        assert outcome.summary["v_t"] == pytest.approx(0.5, abs=1e-6)
        assert outcome.summary["laplace"] == pytest.approx(math.exp(-0.5), abs=1e-6)
        assert outcome.summary["extinction_probability"] == pytest.approx(math.exp(-1.0), abs=1e-6)
        assert {r.path for r in outcome.artifacts} == {"flow.csv", "extinction.csv", "flow.json"}
        assert (tmp_path / "flow.csv").read_text().startswith("t,v\n")
        assert load(tmp_path, "flow.json")["mechanism"]["c"] == 1.0

    def test_flow_without_grey(self, tmp_path):
        """Test that Neveu's mechanism reports no extinction probability."""
        config = validate_config(values={"experiment": "flow", "mechanism.kind": "neveu"})
        outcome = ExecutorFactory().create_executor("flow").execute(config, tmp_path)

        assert outcome.success
        assert outcome.summary["grey"] == "violated"
        assert "extinction_probability" not in outcome.summary

    def test_lyapunov_needs_alpha(self, tmp_path):
        """Test that the Lyapunov pipeline refuses to run without α."""
        with pytest.raises(ConfigError) as excinfo:
            run("lyapunov", tmp_path, **{"competition.kind": "logistic"})
        assert excinfo.value.diagnostics[0].key == "params.alpha"

    def test_coupling_inequality_without_fluctuation(self, tmp_path):
        """Test that Feller fails the search but still writes its artifacts."""
        outcome = run("coupling-inequality", tmp_path, **{"competition.kind": "logistic"})

        assert outcome.exit_code == 3
        assert "fluctuation condition not satisfied" in outcome.message
        assert (tmp_path / "coupling_inequality.json").exists()
        assert (tmp_path / "coupling_trace.csv").exists()


class TestStochasticExecutors:
    """Test small Monte Carlo pipelines."""

    def test_simulate_with_competition(self, tmp_path):
        """Test that competition skips the Laplace checks."""
        outcome = run("simulate", tmp_path, **{"competition.kind": "logistic", **SMALL_RUN})

        assert outcome.success
        assert {r.path for r in outcome.artifacts} == {"path.csv", "hitting.json"}
        assert 0.0 <= outcome.summary["extinction_probability"] <= 1.0
        assert "laplace_z" not in outcome.summary

    def test_simulate_reproducible(self, tmp_path):
        """Test that a fixed seed gives identical artifacts."""
        first = run("simulate", tmp_path / "a", **{"competition.kind": "logistic", **SMALL_RUN})
        second = run("simulate", tmp_path / "b", **{"competition.kind": "logistic", **SMALL_RUN})
        assert [r.sha256 for r in first.artifacts] == [r.sha256 for r in second.artifacts]

    def test_couple(self, tmp_path):
        """Test that coupled pairs stay ordered."""
        outcome = run("couple", tmp_path, **{"competition.kind": "logistic", **SMALL_RUN})

        assert outcome.success
        assert outcome.summary["ordering_violations"] == 0
        assert outcome.summary["comparison_violations"] == 0
        assert outcome.summary["mean_final_gap"] >= 0.0
        coalesced = outcome.summary["coalesced_fraction"] * outcome.summary["n_paths"]
        assert outcome.summary["merged_pairs"] <= round(coalesced)
        assert (tmp_path / "coupled_mean.csv").exists()

    def test_lamperti_rejects_competition(self, tmp_path):
        """Test that the Lamperti pipeline needs g = 0."""
        with pytest.raises(ConfigError) as excinfo:
            run("lamperti", tmp_path, **{"competition.kind": "logistic", **SMALL_RUN})
        assert excinfo.value.diagnostics[0].key == "competition.kind"
