"""Simulation settings."""

import math
from dataclasses import dataclass

from ..core.errors import PreconditionError


@dataclass(frozen=True)
class SimConfig:
    """
    Discretisation and randomness settings for path simulation.

    Attributes:
        dt: Grid step Δt
        eps: Small-jump truncation ε ∈ (0, 1]
        horizon: Final time T
        seed: 64-bit RNG seed
        stream: Stream index; each (seed, stream) pair is an independent family of blocks
        absorption_tol: States at or below this value after a step are set to 0
        allow_explosion: Skip the non-explosion check (runs stay capped at ``horizon``)
    """

    dt: float = 0.01
    eps: float = 0.01
    horizon: float = 1.0
    seed: int = 0
    stream: int = 0
    absorption_tol: float = 0.0
    allow_explosion: bool = False

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise PreconditionError(f"Δt must be > 0, got {self.dt}")
        if not 0.0 < self.eps <= 1.0:
            raise PreconditionError(f"ε must lie in (0, 1], got {self.eps}")
        if not self.horizon > 0:
            raise PreconditionError(f"horizon T must be > 0, got {self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise PreconditionError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream < 0:
            raise PreconditionError(f"stream index must be ≥ 0, got {self.stream}")
        if self.absorption_tol < 0:
            raise PreconditionError("absorption tolerance must be ≥ 0")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.horizon / self.dt - 1e-9))

    def grid(self) -> list[float]:
        """Fixed step grid 0, Δt, ..., T (last step shortened to land on T)."""
        points = [min(k * self.dt, self.horizon) for k in range(self.n_steps + 1)]
        points[-1] = self.horizon
        return points
