"""Branching mechanisms, competition functions and condition checkers."""

from .branching import BranchingMechanism, feller, psi_eval
from .competition import (
    CustomCompetition,
    LinearCompetition,
    LogisticCompetition,
    LogPowerGrowth,
    PowerCompetition,
    PowerGrowth,
    ZeroCompetition,
    check_competition,
    growth_integral,
)
from .conditions import (
    classify_criticality,
    fluctuation_check,
    grey_check,
    growth_scale,
    irreducibility_check,
    near_zero_check,
    nontriviality_check,
    qsd_hypotheses_check,
    stable_lower_bound,
)
from .levy import (
    FiniteAtoms,
    MeasureBase,
    Neveu,
    Stable,
    TabulatedDensity,
    TemperedStable,
    TruncatedStable,
    ZeroMeasure,
)


__all__ = [
    "BranchingMechanism",
    "CustomCompetition",
    "FiniteAtoms",
    "LinearCompetition",
    "LogPowerGrowth",
    "LogisticCompetition",
    "MeasureBase",
    "Neveu",
    "PowerCompetition",
    "PowerGrowth",
    "Stable",
    "TabulatedDensity",
    "TemperedStable",
    "TruncatedStable",
    "ZeroCompetition",
    "ZeroMeasure",
    "check_competition",
    "classify_criticality",
    "feller",
    "fluctuation_check",
    "grey_check",
    "growth_integral",
    "growth_scale",
    "irreducibility_check",
    "near_zero_check",
    "nontriviality_check",
    "psi_eval",
    "qsd_hypotheses_check",
    "stable_lower_bound",
]
