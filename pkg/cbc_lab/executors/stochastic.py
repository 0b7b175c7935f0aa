"""Executors for the Monte Carlo experiments; every one of them needs a seed."""

import logging
from pathlib import Path

import numpy as np

from ..config.constants import DEFAULT_EPS_FACTOR
from ..core.errors import ConfigError, Diagnostic, SurvivorDepletion
from ..core.interfaces import ExperimentExecutor
from ..core.models import ExperimentOutcome
from ..lamperti import crossvalidate, hitting_positivity_probe, simulate_levy, time_change
from ..mechanism.competition import ZeroCompetition
from ..mechanism.conditions import near_zero_check
from ..qsd import (
    EmpiricalDistribution,
    conditional_law_naive,
    convergence_rate_fit,
    qsd_fixed_point_residual,
    run_fleming_viot,
    small_initial_extinction_probe,
    tv_between_samples,
)
from ..services.workspace import ArtifactWriter, ExperimentConfig
from ..simulator.estimators import (
    hitting_time,
    mc_branching_check,
    mc_laplace_check,
    refinement_check,
)
from ..simulator.paths import simulate_coupled_ensemble, simulate_coupled_pair, simulate_path
from .reporting import build_outcome, model_descriptor


logger = logging.getLogger(__name__)


class StochasticExecutor(ExperimentExecutor):
    """Base for experiments that draw from the config seed."""

    @property
    def stochastic(self) -> bool:
        return True


class SimulateExecutor(StochasticExecutor):
    """
    One exported path, the extinction-time distribution and, without
    competition, Laplace, refinement and branching-property checks.

    Streams: 0 path, 1 extinction times, 2 Laplace, 3-4 refinement, 5-7 branching.
    """

    @property
    def name(self) -> str:
        return "simulate"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        mech, g = config.mechanism, config.competition
        x0, lam, t, n = config.param("x0"), config.param("lambda"), config.param("t"), config.param("n_paths")
        writer = ArtifactWriter(out_dir)

        path = simulate_path(mech, g, x0, config.sim_config(stream=0))
        writer.write_csv("path.csv", ["t", "y", "event"], path.rows())

        extinction = hitting_time(mech, g, x0, 0.0, config.sim_config(stream=1), n, config.threads)
        writer.write_json("hitting.json", extinction.to_dict())
        estimate = extinction.probability_by()
        summary = {
            "path_events": len(path.rows()),
            "path_absorbed": path.absorbed,
            "extinction_probability": estimate.value,
            "extinction_std_error": estimate.std_error,
        }

        if g.kind == "zero":
            laplace = mc_laplace_check(mech, g, x0, lam, t, n, config.sim_config(stream=2), config.threads)
            refined = refinement_check(mech, x0, lam, t, n, config.sim_config(stream=3), config.threads)
            branching = mc_branching_check(
                mech, config.param("x1"), config.param("x2"), lam, t, n,
                config.sim_config(stream=5), config.threads,
            )
            writer.write_json(
                "laplace.json",
                {
                    **model_descriptor(config),
                    "laplace": laplace.to_dict(),
                    "refinement": {
                        "coarse": refined.coarse.to_dict(),
                        "fine": refined.fine.to_dict(),
                        "z_score": refined.z_score,
                    },
                    "branching": branching.to_dict(),
                },
            )
            summary.update(
                laplace_z=laplace.z_score,
                refinement_z=refined.z_score,
                branching_z=branching.z_score,
            )
        else:
            logger.info(f"competition {g.kind!r} present: Laplace checks skipped")

        return build_outcome(
            self.name,
            writer,
            f"{n} paths, P(extinct by {config.param('horizon'):g}) = {estimate.value:.4g} ± {estimate.std_error:.2g}",
            summary,
        )


class CoupleExecutor(StochasticExecutor):
    """
    Coupled pairs from x1 ≥ x2: one exported pair, an ensemble under the same
    competition and a comparison ensemble against the competition-free process.
    """

    @property
    def name(self) -> str:
        return "couple"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        mech, g = config.mechanism, config.competition
        x1, x2, n = config.param("x1"), config.param("x2"), config.param("n_paths")
        writer = ArtifactWriter(out_dir)

        pair = simulate_coupled_pair(mech, g, x1, x2, config.sim_config(stream=0))
        writer.write_csv(
            "coupled.csv",
            ["t", "upper", "lower"],
            [
                (float(t), float(a), float(b))
                for t, a, b in zip(pair.upper.times, pair.upper.values, pair.lower.values)
            ],
        )

        same = simulate_coupled_ensemble(mech, g, x1, x2, config.sim_config(stream=1), n, threads=config.threads)
        versus_free = simulate_coupled_ensemble(
            mech, ZeroCompetition(), x1, x2, config.sim_config(stream=2), n,
            g_lower=g, threads=config.threads,
        )
        merged = same.upper == same.lower
        writer.write_csv(
            "coupled_mean.csv",
            ["t", "mean_upper", "mean_lower", "coalesced"],
            [
                (float(t), float(u), float(v), float(c))
                for t, u, v, c in zip(
                    same.times, same.upper.mean(axis=0), same.lower.mean(axis=0), merged.mean(axis=0)
                )
            ],
        )
        summary = {
            "x1": x1,
            "x2": x2,
            "n_paths": n,
            "ordering_violations": same.ordering_violations,
            "comparison_violations": versus_free.ordering_violations,
            "merged_pairs": same.merged_pairs,
            "coalesced_fraction": float(merged[:, -1].mean()),
            "mean_final_gap": float(np.mean(same.upper[:, -1] - same.lower[:, -1])),
        }
        writer.write_json("couple.json", {**model_descriptor(config), **summary})
        return build_outcome(
            self.name,
            writer,
            f"{n} pairs ordered, {summary['coalesced_fraction']:.1%} coalesced by the horizon",
            summary,
        )


class LampertiExecutor(StochasticExecutor):
    """
    Lamperti cross-validation, one exported Lévy path with its clock and the
    hitting positivity probe.

    Streams: 0-1 cross-validation, 2 exported path, 3 positivity probe.
    """

    @property
    def name(self) -> str:
        return "lamperti"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        if config.competition.kind != "zero":
            raise ConfigError(
                [Diagnostic("the Lamperti transform applies without competition", key="competition.kind")]
            )
        mech = config.mechanism
        x0, t, n = config.param("x0"), config.param("t"), config.param("n_paths")
        eps = config.param("level_eps")
        if eps is None:
            eps = DEFAULT_EPS_FACTOR * x0
        writer = ArtifactWriter(out_dir)

        report = crossvalidate(mech, x0, t, n, config.sim_config(stream=0), eps=eps, threads=config.threads)
        writer.write_json("crossvalidation.json", report.to_dict())

        levy = simulate_levy(mech, x0, config.sim_config(stream=2))
        writer.write_csv("levy_path.csv", ["t", "y", "event"], levy.rows())
        clock = time_change(levy, eps)
        writer.write_csv(
            "time_change.csv",
            ["s", "eta", "n"],
            [(float(s), float(c), float(v)) for s, c, v in zip(clock.times, clock.clock, clock.levels)],
        )

        z = config.param("x1")
        probe = hitting_positivity_probe(
            mech, x0, z if z > x0 else None, eps, t, n, config.sim_config(stream=3), config.threads
        )
        writer.write_json("positivity.json", probe.to_dict())

        summary = {
            "ks_stat": report.ks_stat,
            "p_value": report.p_value,
            "eps": eps,
            "unfinished": report.unfinished,
            "positive_events": [f.event for f in probe.frequencies if f.positive],
        }
        return build_outcome(
            self.name, writer, f"KS {report.ks_stat:.4g} (p = {report.p_value:.3g}) on {report.n} paths", summary
        )


class QsdExecutor(StochasticExecutor):
    """
    Fleming-Viot estimate of the conditional law, the naive estimate when
    enough paths survive, the fixed-point residual and the small-start probe.

    Streams: 0 Fleming-Viot, 1 naive, 2 residual, 10+ small-start probe.
    """

    @property
    def name(self) -> str:
        return "qsd"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        mech, g = config.mechanism, config.competition
        init, t = config.param("init1"), config.param("t")
        particles, n, bins = config.param("particles"), config.param("n_paths"), config.param("bins")
        writer = ArtifactWriter(out_dir)
        warnings: list[str] = []

        ensemble = run_fleming_viot(mech, g, init, [t], particles, config.sim_config(stream=0))
        law = EmpiricalDistribution.from_samples(ensemble.snapshots[float(t)], bins=bins)
        writer.write_csv("qsd.csv", ["bin_lo", "bin_hi", "mass"], law.rows())
        summary = {
            "t": t,
            "particles": particles,
            "resurrections": ensemble.resurrections,
            "mean": law.mean,
        }

        try:
            naive = conditional_law_naive(mech, g, init, t, n, config.sim_config(stream=1), bins, config.threads)
        except SurvivorDepletion as e:
            logger.warning(f"naive conditional law skipped: {e}")
            warnings.append(str(e))
        else:
            writer.write_csv("naive.csv", ["bin_lo", "bin_hi", "mass"], naive.rows())
            summary["naive_vs_fleming_viot_tv"] = tv_between_samples(naive.samples, law.samples, bins=bins)

        summary["fixed_point_residual"] = qsd_fixed_point_residual(
            mech, g, law, config.param("horizon"), particles, config.sim_config(stream=2), bins, config.threads
        )
        summary["residual_horizon"] = config.param("horizon")

        theta = config.values["competition.theta"]
        if near_zero_check(mech, g, theta).satisfied:
            probe = small_initial_extinction_probe(
                mech, g, config.float_list("y_grid"), t, n, config.sim_config(stream=10),
                delta=config.param("delta"), theta=theta, threads=config.threads,
            )
            writer.write_json("small_start.json", probe.to_dict())
            writer.write_csv("small_start.csv", ["y", "survival", "std_error", "envelope"], probe.table())
            summary["small_start_monotone"] = probe.monotone
        if warnings:
            summary["warnings"] = warnings

        writer.write_json("qsd.json", {**model_descriptor(config), **summary, "law": law.to_dict()})
        return build_outcome(
            self.name,
            writer,
            f"conditional law at t={t:g} from {particles} particles, residual {summary['fixed_point_residual']:.3g}",
            summary,
        )


class RateExecutor(StochasticExecutor):
    """Exponential rate at which Fleming-Viot laws from init1 and init2 merge."""

    @property
    def name(self) -> str:
        return "rate"

    def execute(self, config: ExperimentConfig, out_dir: Path) -> ExperimentOutcome:
        fit = convergence_rate_fit(
            config.mechanism,
            config.competition,
            config.param("init1"),
            config.param("init2"),
            config.float_list("t_grid"),
            config.param("particles"),
            config.sim_config(stream=0),
            config.param("bins"),
        )
        writer = ArtifactWriter(out_dir)
        writer.write_json("rate.json", fit.to_dict())
        writer.write_csv("rate.csv", ["t", "distance"], fit.rows())
        summary = fit.to_dict()
        if not fit.converged:
            summary["warnings"] = ["distances do not decay above the noise floor"]
        return build_outcome(self.name, writer, f"{fit.verdict}, lambda_hat = {fit.lambda_hat:.4g}", summary)
