"""Runtime configuration management for cbc-lab."""

from dataclasses import dataclass, field
from typing import Any, Optional

from ..config.constants import (
    DEFAULT_TIMEOUT,
    DIVERGENCE_THRESHOLD,
    DIVERGENCE_WINDOW,
    ODE_RTOL,
    PATHS_PER_BLOCK,
    QUAD_RTOL,
    SIGN_TOL,
)
from ..core.formatters import CompactFormatter, StandardFormatter
from ..core.interfaces import ResultFormatter


@dataclass
class LabConfig:
    """Process-wide defaults for numerics and execution."""

    # Output formatting
    formatter_type: str = "standard"  # "standard" or "compact"

    # Numerical tolerances
    quad_rtol: float = QUAD_RTOL
    sign_tol: float = SIGN_TOL
    ode_rtol: float = ODE_RTOL
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    divergence_window: int = DIVERGENCE_WINDOW

    # Execution
    threads: int = 1
    paths_per_block: int = PATHS_PER_BLOCK
    timeout: float = DEFAULT_TIMEOUT

    extra_config: dict[str, Any] = field(default_factory=dict)

    def get_formatter(self) -> ResultFormatter:
        """Get the configured result formatter."""
        if self.formatter_type == "compact":
            return CompactFormatter()
        return StandardFormatter()


class ConfigManager:
    """Holds the active LabConfig."""

    def __init__(self, config: Optional[LabConfig] = None):
        self._config = config or LabConfig()

    @property
    def config(self) -> LabConfig:
        """Get the current configuration."""
        return self._config

    def update_config(self, **kwargs) -> None:
        """Update configuration values; unknown names are ignored."""
        for key, value in kwargs.items():
            if hasattr(self._config, key):
                setattr(self._config, key, value)

    def reset(self) -> None:
        """Restore the defaults."""
        self._config = LabConfig()

    def get_formatter(self) -> ResultFormatter:
        """Get the configured result formatter."""
        return self._config.get_formatter()


# Global configuration manager instance
_config_manager = ConfigManager()


def get_config_manager() -> ConfigManager:
    """Get the global configuration manager."""
    return _config_manager


def configure(**kwargs) -> None:
    """Configure cbc-lab globally."""
    _config_manager.update_config(**kwargs)
