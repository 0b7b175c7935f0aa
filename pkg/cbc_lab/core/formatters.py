"""Console formatting of experiment results and condition reports."""

from typing import Optional

from .interfaces import ResultFormatter
from .models import ConditionReport


class StandardFormatter(ResultFormatter):
    """Bracketed status tags, details on following lines."""

    def format_success(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        result = f"[SUCCESS] {name}: {message}"
        if details and details.strip():
            result += f"\n\n{details}"
        return result

    def format_warning(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        result = f"[WARNING] {name}: {message}"
        if details and details.strip():
            result += f"\n\n{details}"
        return result

    def format_error(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        result = f"[ERROR] {name}: {message}"
        if details and details.strip():
            result += f"\n\n{details}"
        return result

    def format_report(self, report: ConditionReport) -> str:
        lines = [f"[{report.verdict.value.upper()}] {report.condition}"]
        for item in report.evidence:
            suffix = f" ({item.note})" if item.note else ""
            lines.append(f"    {item.label} = {item.value}{suffix}")
        return "\n".join(lines)


class CompactFormatter(ResultFormatter):
    """One line per result."""

    def format_success(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        return f"OK: {name} - {message}"

    def format_warning(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        return f"WARN: {name} - {message}"

    def format_error(
        self, name: str, message: str, details: Optional[str] = None
    ) -> str:
        return f"ERROR: {name} - {message}"

    def format_report(self, report: ConditionReport) -> str:
        return f"{report.condition}: {report.verdict.value}"
