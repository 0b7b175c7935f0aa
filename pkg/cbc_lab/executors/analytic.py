"""Executors for the deterministic experiments: conditions, flow, certificates."""

import logging
from pathlib import Path

from ..cbflow import extinction_prob, extinction_profile, laplace_transform, solve_v
from ..config.constants import EXIT_NUMERIC
from ..core.config import get_config_manager
from ..core.errors import ConfigError, Diagnostic
from ..core.interfaces import ExperimentExecutor
from ..core.models import ExperimentOutcome, Verdict
from ..generator.certificates import (
    build_lyapunov,
    verify_coupling_inequality,
    verify_lyapunov,
)
from ..mechanism.conditions import (
    classify_criticality,
    fluctuation_check,
    grey_check,
    irreducibility_check,
    near_zero_check,
    nontriviality_check,
    qsd_hypotheses_check,
)
from ..services.workspace import ArtifactWriter, ExperimentConfig
from .reporting import build_outcome, model_descriptor


logger = logging.getLogger(__name__)


class ConditionsExecutor(ExperimentExecutor):
    """Run every condition checker on the configured model."""

    @property
    def name(self) -> str:
        return "conditions"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        mech, g = config.mechanism, config.competition
        theta = config.values["competition.theta"]
        reports = [
            grey_check(mech),
            fluctuation_check(mech),
            nontriviality_check(mech),
            irreducibility_check(mech),
            near_zero_check(mech, g, theta),
        ]
        alpha = config.param("alpha")
        if alpha is not None:
            reports.append(qsd_hypotheses_check(mech, g, config.growth, alpha, theta))
        criticality = classify_criticality(mech)

        writer = ArtifactWriter(out_dir)
        writer.write_json(
            "conditions.json",
            {
                **model_descriptor(config),
                "criticality": criticality.value,
                "reports": [report.to_dict() for report in reports],
            },
        )
        formatter = get_config_manager().get_formatter()
        verdicts = {report.condition: report.verdict.value for report in reports}
        inconclusive = sum(r.verdict is Verdict.INCONCLUSIVE for r in reports)
        message = f"{len(reports)} conditions checked, {criticality.value}"
        if inconclusive:
            message += f", {inconclusive} inconclusive"
        return build_outcome(
            self.name,
            writer,
            message,
            {"criticality": criticality.value, "verdicts": verdicts},
            details="\n".join(formatter.format_report(report) for report in reports),
        )


class FlowExecutor(ExperimentExecutor):
    """Solve the flow, tabulate v̄_t and evaluate the Laplace transform."""

    @property
    def name(self) -> str:
        return "flow"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        mech = config.mechanism
        lam, t, x0 = config.param("lambda"), config.param("t"), config.param("x0")
        t_max = max(config.param("t_max"), t)
        writer = ArtifactWriter(out_dir)

        solution = solve_v(mech, lam, t_max)
        writer.write_csv("flow.csv", ["t", "v"], solution.rows())
        profile = extinction_profile(mech, [v for v in config.float_list("t_grid") if v > 0])
        writer.write_csv("extinction.csv", ["t", "vbar", "finite"], profile.rows())

        summary = {
            "lambda": lam,
            "t": t,
            "x0": x0,
            "v_t": solution.value_at(t) if not solution.blow_up else None,
            "blow_up": solution.blow_up,
            "steps": solution.steps,
            "max_local_error": solution.max_local_error,
        }
        if not solution.blow_up:
            summary["laplace"] = laplace_transform(mech, x0, lam, t)
        grey = grey_check(mech)
        summary["grey"] = grey.verdict.value
        if grey.satisfied and t > 0:
            summary["extinction_probability"] = extinction_prob(mech, x0, t)
        writer.write_json("flow.json", {**model_descriptor(config), **summary})

        if solution.blow_up:
            return build_outcome(
                self.name,
                writer,
                f"flow stopped before t={t_max} (blow-up)",
                summary,
                exit_code=EXIT_NUMERIC,
            )
        return build_outcome(
            self.name, writer, f"v_{t:g}({lam:g}) = {summary['v_t']:.10g}", summary
        )


class LyapunovExecutor(ExperimentExecutor):
    """Build the Lyapunov certificate and re-check it on a finer grid."""

    @property
    def name(self) -> str:
        return "lyapunov"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        alpha = config.param("alpha")
        if alpha is None:
            raise ConfigError(
                [Diagnostic("the lyapunov experiment needs the tail regime α", key="params.alpha")]
            )
        mech, g = config.mechanism, config.competition
        cert = build_lyapunov(mech, g, alpha, config.growth)
        check = verify_lyapunov(cert, mech, g, config.param("n_max"))

        writer = ArtifactWriter(out_dir)
        writer.write_json(
            "lyapunov.json",
            {
                **model_descriptor(config),
                "alpha": alpha,
                "certificate": cert.to_dict(),
                "verification": check.to_dict(),
            },
        )
        writer.write_csv("lyapunov_margins.csv", ["x", "lhs", "rhs", "margin"], list(check.margin_rows))
        summary = {"l": cert.l, "C0": cert.c0, "accepted": check.accepted, "rows": len(cert.rows)}
        if not check.accepted:
            return build_outcome(
                self.name,
                writer,
                f"certificate rejected at x={check.offending_x:g}",
                summary,
                exit_code=EXIT_NUMERIC,
            )
        return build_outcome(
            self.name, writer, f"certificate accepted with l={cert.l:g}, C0={cert.c0:.6g}", summary
        )


class CouplingInequalityExecutor(ExperimentExecutor):
    """Search for the coupling-inequality window length l."""

    @property
    def name(self) -> str:
        return "coupling-inequality"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        result = verify_coupling_inequality(
            config.mechanism,
            config.competition,
            config.param("rho"),
            config.param("A"),
            config.param("B"),
            config.param("target_C"),
        )
        writer = ArtifactWriter(out_dir)
        writer.write_json("coupling_inequality.json", {**model_descriptor(config), **result.to_dict()})
        writer.write_csv("coupling_trace.csv", ["l", "worst_margin"], list(result.trace))
        summary = {"success": result.success, "l": result.l, "worst_margin": result.worst_margin}
        if not result.success:
            return build_outcome(
                self.name, writer, f"no admissible l: {result.reason}", summary, exit_code=EXIT_NUMERIC
            )
        return build_outcome(
            self.name,
            writer,
            f"l={result.l:g} with worst margin {result.worst_margin:.6g}",
            summary,
        )
