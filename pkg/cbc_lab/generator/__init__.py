"""Generators L and L̃, test functions and grid certificates."""

from .certificates import (
    CouplingInequalityResult,
    LyapunovCertificate,
    LyapunovRow,
    LyapunovVerification,
    NonExplosionCertificate,
    build_lyapunov,
    geometric_grid,
    verify_coupling_inequality,
    verify_lyapunov,
    verify_nonexplosion,
)
from .operators import apply_coupling_L, apply_coupling_L_diff, apply_L
from .overlap import OverlapMeasure, overlap_mass
from .test_functions import (
    Constant,
    CouplingPhi,
    CustomFunction,
    Exponential,
    GrowthScale,
    Identity,
    LogOnePlus,
    LyapunovF,
    PairFunction,
)


__all__ = [
    "Constant",
    "CouplingInequalityResult",
    "CouplingPhi",
    "CustomFunction",
    "Exponential",
    "GrowthScale",
    "Identity",
    "LogOnePlus",
    "LyapunovCertificate",
    "LyapunovF",
    "LyapunovRow",
    "LyapunovVerification",
    "NonExplosionCertificate",
    "OverlapMeasure",
    "PairFunction",
    "apply_L",
    "apply_coupling_L",
    "apply_coupling_L_diff",
    "build_lyapunov",
    "geometric_grid",
    "overlap_mass",
    "verify_coupling_inequality",
    "verify_lyapunov",
    "verify_nonexplosion",
]
