"""Path simulation of the CBC equation, coupled pairs and Monte Carlo estimators."""

from .config import SimConfig
from .estimators import (
    BranchingCheck,
    ExitScan,
    HittingDistribution,
    LaplaceCheck,
    RefinementCheck,
    exit_probability_scan,
    hitting_time,
    mc_branching_check,
    mc_laplace_check,
    refinement_check,
    wilson_interval,
)
from .paths import (
    CoupledEnsemble,
    CoupledPair,
    EnsembleResult,
    HitTimes,
    PathSample,
    simulate_coupled_ensemble,
    simulate_coupled_pair,
    simulate_ensemble,
    simulate_path,
)
from .scheme import BlockTrace, JumpAdaptedEuler, block_rng


__all__ = [
    "BlockTrace",
    "BranchingCheck",
    "CoupledEnsemble",
    "CoupledPair",
    "EnsembleResult",
    "ExitScan",
    "HitTimes",
    "HittingDistribution",
    "JumpAdaptedEuler",
    "LaplaceCheck",
    "PathSample",
    "RefinementCheck",
    "SimConfig",
    "block_rng",
    "exit_probability_scan",
    "hitting_time",
    "mc_branching_check",
    "mc_laplace_check",
    "refinement_check",
    "simulate_coupled_ensemble",
    "simulate_coupled_pair",
    "simulate_ensemble",
    "simulate_path",
    "wilson_interval",
]
