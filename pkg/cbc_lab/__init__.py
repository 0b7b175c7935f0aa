"""
cbc-lab - numerical laboratory for continuous-state branching processes with competition.

Branching mechanisms and condition checkers, the CB flow and Laplace
transforms, generator evaluations and certificates, a jump-adapted path
simulator, the Lamperti time change, and conditional-law / quasi-stationary
distribution estimators, driven by a batch experiment CLI.
"""

__version__ = "0.1.0"
__author__ = "cbc-lab Contributors"

from .cbflow import extinction_prob, laplace_transform, solve_v, vbar
from .core.config import configure, get_config_manager
from .core.errors import (
    CbcLabError,
    ConfigError,
    InvariantBreach,
    NumericalFailure,
    PreconditionError,
    SurvivorDepletion,
)
from .core.models import ConditionReport, ExperimentOutcome, Verdict
from .mechanism import BranchingMechanism, feller, grey_check, qsd_hypotheses_check
from .services.orchestrator import ExperimentOrchestrator, run_experiment
from .services.workspace import ExperimentConfig, validate_config
from .simulator import SimConfig, simulate_ensemble, simulate_path


__all__ = [
    "BranchingMechanism",
    "CbcLabError",
    "ConditionReport",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentOrchestrator",
    "ExperimentOutcome",
    "InvariantBreach",
    "NumericalFailure",
    "PreconditionError",
    "SimConfig",
    "SurvivorDepletion",
    "Verdict",
    "configure",
    "extinction_prob",
    "feller",
    "get_config_manager",
    "grey_check",
    "laplace_transform",
    "qsd_hypotheses_check",
    "run_experiment",
    "simulate_ensemble",
    "simulate_path",
    "solve_v",
    "validate_config",
]
