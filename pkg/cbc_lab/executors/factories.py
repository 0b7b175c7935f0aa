"""Factory for creating experiment executors."""

from typing import ClassVar, Optional

from ..core.interfaces import ExperimentExecutor
from .analytic import (
    ConditionsExecutor,
    CouplingInequalityExecutor,
    FlowExecutor,
    LyapunovExecutor,
)
from .stochastic import (
    CoupleExecutor,
    LampertiExecutor,
    QsdExecutor,
    RateExecutor,
    SimulateExecutor,
)


class ExecutorFactory:
    """Factory for creating experiment executors by kind."""

    _EXECUTOR_CLASSES: ClassVar[dict[str, type[ExperimentExecutor]]] = {
        "conditions": ConditionsExecutor,
        "flow": FlowExecutor,
        "simulate": SimulateExecutor,
        "couple": CoupleExecutor,
        "lyapunov": LyapunovExecutor,
        "coupling-inequality": CouplingInequalityExecutor,
        "lamperti": LampertiExecutor,
        "qsd": QsdExecutor,
        "rate": RateExecutor,
    }

    def create_executor(self, experiment: str) -> Optional[ExperimentExecutor]:
        """Create the executor for an experiment kind (None if unknown)."""
        executor_class = self._EXECUTOR_CLASSES.get(experiment)
        if executor_class:
            return executor_class()

        return None

    def get_supported_experiments(self) -> list[str]:
        """Get list of supported experiment kinds."""
        return list(self._EXECUTOR_CLASSES.keys())
