"""Shared fixtures for cbc-lab tests."""

from pathlib import Path

import pytest
from scipy.special import gamma

from cbc_lab.core.config import get_config_manager
from cbc_lab.mechanism import (
    BranchingMechanism,
    LogisticCompetition,
    Neveu,
    Stable,
    TruncatedStable,
    ZeroCompetition,
    feller,
)
from cbc_lab.simulator import SimConfig


@pytest.fixture(autouse=True)
def reset_lab_config():
    """Every test starts from the default LabConfig."""
    get_config_manager().reset()
    yield
    get_config_manager().reset()


@pytest.fixture
def feller_mech():
    """Feller diffusion with c = 1, b = 0: v_t(λ) = λ / (1 + λt)."""
    return feller(c=1.0)


@pytest.fixture
def neveu_mech():
    return BranchingMechanism(b=0.0, c=0.0, mu=Neveu(C=1.0))


@pytest.fixture
def truncated_stable_mech():
    return BranchingMechanism(b=0.0, c=0.0, mu=TruncatedStable(C=1.0, beta=1.5))


@pytest.fixture
def pure_stable_mech():
    """Stable mechanism tuned so that Ψ(λ) = λ^1.5 exactly."""
    C = 1.0 / gamma(-1.5)
    return BranchingMechanism(b=2.0 * C, c=0.0, mu=Stable(C=C, beta=1.5))


@pytest.fixture
def logistic():
    return LogisticCompetition(a=1.0)


@pytest.fixture
def no_competition():
    return ZeroCompetition()


@pytest.fixture
def sim_cfg():
    return SimConfig(dt=0.01, eps=0.01, horizon=1.0, seed=7)


@pytest.fixture
def write_config(tmp_path):
    """Write a config file into tmp_path and return its path as a string."""

    def _write(text: str, name: str = "experiment.cfg") -> str:
        target = Path(tmp_path) / name
        target.write_text(text)
        return str(target)

    return _write
