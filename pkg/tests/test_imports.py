"""Test that all main modules can be imported."""

import pytest


class TestImports:
    """Test that all main modules can be imported without errors."""

    def test_import_core_models(self):
        """Test importing core models."""
        from cbc_lab.core.models import ConditionReport, EnsembleSummary, ExperimentOutcome

        assert ConditionReport is not None
        assert EnsembleSummary is not None
        assert ExperimentOutcome is not None

    def test_import_workspace_services(self):
        """Test importing workspace services."""
        from cbc_lab.services.workspace import load_config_file, validate_config

        assert load_config_file is not None
        assert validate_config is not None

    def test_import_orchestrator(self):
        """Test importing orchestrator."""
        from cbc_lab.services.orchestrator import ExperimentOrchestrator

        assert ExperimentOrchestrator is not None

    def test_import_factories(self):
        """Test importing executor factories."""
        from cbc_lab.executors.factories import ExecutorFactory

        assert ExecutorFactory is not None

    def test_import_domain_modules(self):
        """Test importing the numerical modules."""
        from cbc_lab import cbflow, lamperti, qsd
        from cbc_lab.generator import certificates, operators
        from cbc_lab.mechanism import branching, conditions
        from cbc_lab.simulator import estimators, paths

        for module in (cbflow, lamperti, qsd, certificates, operators, branching, conditions, estimators, paths):
            assert module is not None

    def test_import_main_api(self):
        """Test importing main API."""
        import cbc_lab
        from cbc_lab import run_experiment, solve_v, validate_config

        assert cbc_lab.__version__ == "0.1.0"
        assert run_experiment is not None
        assert solve_v is not None
        assert validate_config is not None


if __name__ == "__main__":
    pytest.main([__file__])
