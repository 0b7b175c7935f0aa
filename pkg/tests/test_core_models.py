"""Tests for cbc_lab.core.models and cbc_lab.core.errors modules."""

import math

import pytest

from cbc_lab.core.errors import (
    CbcLabError,
    ConfigError,
    Diagnostic,
    DomainError,
    InvariantBreach,
    NumericalFailure,
    PreconditionError,
    SurvivorDepletion,
)
from cbc_lab.core.models import (
    ArtifactRecord,
    ConditionReport,
    EnsembleSummary,
    Evidence,
    ExperimentOutcome,
    QuadratureResult,
    Verdict,
)


class TestCoreModels:
    """Test core models functionality."""

    def test_condition_report(self):
        """Test ConditionReport verdict and evidence lookup."""
        report = ConditionReport(
            condition="grey",
            verdict=Verdict.SATISFIED,
            evidence=(Evidence("theta_star", 0.5), Evidence("cutoff", 1e10, "Λ")),
            tolerance=1e-10,
        )

        assert report.satisfied is True
        assert report.evidence_value("theta_star") == 0.5
        with pytest.raises(KeyError):
            report.evidence_value("missing")

        data = report.to_dict()
        assert data["verdict"] == "satisfied"
        assert data["evidence"][1] == {"label": "cutoff", "value": 1e10, "note": "Λ"}

    def test_evidence_non_finite_value(self):
        """Test that infinite evidence values serialise as strings."""
        assert Evidence("moment", math.inf).to_dict()["value"] == "inf"
        assert Evidence("flag", True).to_dict() == {"label": "flag", "value": True}

    def test_violated_report_not_satisfied(self):
        """Test a violated report."""
        report = ConditionReport("fluctuation", Verdict.VIOLATED)
        assert report.satisfied is False
        assert report.to_dict()["evidence"] == []

    def test_quadrature_result_addition(self):
        """Test adding quadrature results."""
        total = QuadratureResult(1.0, 1e-9, True, 21) + QuadratureResult(2.0, 1e-8, False, 42)

        assert total.value == 3.0
        assert total.error == pytest.approx(1.1e-8)
        assert total.converged is False
        assert total.evaluations == 63

    def test_ensemble_summary_from_samples(self):
        """Test mean and standard error of an ensemble."""
        summary = EnsembleSummary.from_samples("mean", [1.0, 2.0, 3.0, 4.0, 5.0])

        assert summary.n_paths == 5
        assert summary.value == 3.0
        assert summary.std_error == pytest.approx(math.sqrt(2.5) / math.sqrt(5))

    def test_ensemble_summary_edge_cases(self):
        """Test empty and single-sample ensembles."""
        empty = EnsembleSummary.from_samples("mean", [])
        assert empty.n_paths == 0
        assert math.isnan(empty.value)

        single = EnsembleSummary.from_samples("mean", [7.0])
        assert single.value == 7.0
        assert single.std_error == 0.0

    def test_experiment_outcome(self):
        """Test ExperimentOutcome success flag."""
        ok = ExperimentOutcome(
            experiment="flow",
            exit_code=0,
            message="done",
            artifacts=[ArtifactRecord("flow.csv", "ab" * 32)],
        )
        assert ok.success is True
        assert ok.summary == {}

        failed = ExperimentOutcome(experiment="flow", exit_code=3, message="blow-up")
        assert failed.success is False
        assert failed.artifacts == []


class TestErrors:
    """Test the exception hierarchy and diagnostics."""

    def test_exit_codes(self):
        """Test the exit code carried by each error class."""
        assert CbcLabError.exit_code == 3
        assert ConfigError([]).exit_code == 1
        assert NumericalFailure("x").exit_code == 3
        assert SurvivorDepletion("x").exit_code == 3
        assert InvariantBreach("x").exit_code == 2

    def test_precondition_is_value_error(self):
        """Test that precondition failures are also ValueErrors."""
        assert issubclass(PreconditionError, ValueError)
        assert issubclass(DomainError, PreconditionError)
        assert issubclass(SurvivorDepletion, NumericalFailure)

    def test_diagnostic_str(self):
        """Test diagnostic rendering with and without a position."""
        assert str(Diagnostic("unknown key", key="params.foo", line=3, column=5)) == (
            "line 3, column 5 [params.foo]: unknown key"
        )
        assert str(Diagnostic("missing", key="seed")) == "[seed]: missing"
        assert str(Diagnostic("no config file given")) == "no config file given"

    def test_config_error_collects_diagnostics(self):
        """Test that ConfigError keeps every diagnostic."""
        error = ConfigError([Diagnostic("a", key="x"), Diagnostic("b")])

        assert len(error.diagnostics) == 2
        assert str(error) == "[x]: a\nb"
