"""Exception hierarchy for cbc-lab."""

from dataclasses import dataclass
from typing import Optional

from ..config.constants import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERIC


class CbcLabError(Exception):
    """Base class for all cbc-lab errors."""

    exit_code: int = EXIT_NUMERIC


@dataclass(frozen=True)
class Diagnostic:
    """A single configuration problem, optionally pointing at a source position."""

    message: str
    key: Optional[str] = None
    line: Optional[int] = None
    column: Optional[int] = None

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        prefix = ", ".join(where)
        if self.key:
            prefix = f"{prefix} [{self.key}]" if prefix else f"[{self.key}]"
        return f"{prefix}: {self.message}" if prefix else self.message


class ConfigError(CbcLabError):
    """Invalid experiment configuration; carries every diagnostic found."""

    exit_code = EXIT_CONFIG

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class PreconditionError(CbcLabError, ValueError):
    """A documented precondition of an operation does not hold."""


class DomainError(PreconditionError):
    """Evaluation point lies outside the operator's domain."""


class NumericalFailure(CbcLabError):
    """A numerical procedure could not produce a trustworthy value."""

    exit_code = EXIT_NUMERIC


class SurvivorDepletion(NumericalFailure):
    """Too few surviving paths for a conditional-law estimate."""


class InvariantBreach(CbcLabError):
    """An internal invariant was violated; indicates a scheme bug."""

    exit_code = EXIT_INVARIANT
