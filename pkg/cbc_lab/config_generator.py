#!/usr/bin/env python3
"""
Config template generator for cbc-lab.

Prints a ready-to-run experiment config for one experiment kind, filled in
with the reference model for that kind.
"""

import argparse
import sys
from typing import Any, Optional

from .config.constants import EXPERIMENT_KINDS, STOCHASTIC_KINDS

try:
    import yaml
except ImportError:
    yaml = None


FELLER = {"kind": "feller", "b": 0.0, "c": 1.0}
TRUNCATED_STABLE = {"kind": "custom", "b": 0.0, "c": 0.0, "mu": {"kind": "truncated_stable", "C": 1.0, "beta": 1.5}}
NEVEU = {"kind": "neveu", "b": 0.0, "c": 0.0, "mu": {"C": 1.0}}
LOGISTIC = {"kind": "logistic", "a": 1.0}

# Reference model and parameters per experiment kind
TEMPLATES: dict[str, dict[str, Any]] = {
    "conditions": {
        "mechanism": NEVEU,
        "competition": {"kind": "power", "a": 1.0, "p": 0.5},
        "params": {},
    },
    "flow": {
        "mechanism": FELLER,
        "params": {"lambda": 1.0, "t": 1.0, "t_max": 2.0, "x0": 1.0, "t_grid": "0.5,1,2,4"},
    },
    "simulate": {
        "mechanism": FELLER,
        "params": {"x0": 1.0, "lambda": 1.0, "t": 1.0, "horizon": 1.0, "dt": 0.01, "eps": 0.01, "n_paths": 10000},
    },
    "couple": {
        "mechanism": FELLER,
        "competition": LOGISTIC,
        "params": {"x1": 2.0, "x2": 1.0, "horizon": 2.0, "dt": 0.01, "n_paths": 10000},
    },
    "lyapunov": {
        "mechanism": FELLER,
        "competition": LOGISTIC,
        "growth": {"kind": "log_power", "p": 2.0},
        "params": {"alpha": 1.5, "n_max": 5},
    },
    "coupling-inequality": {
        "mechanism": TRUNCATED_STABLE,
        "competition": {"kind": "power", "a": 1.0, "p": 2.0},
        "params": {"rho": 0.5, "A": 1.0, "B": 2.0, "target_C": 1.0},
    },
    "lamperti": {
        "mechanism": TRUNCATED_STABLE,
        "params": {"x0": 1.0, "t": 0.5, "dt": 0.001, "eps": 0.01, "n_paths": 10000},
    },
    "qsd": {
        "mechanism": FELLER,
        "competition": LOGISTIC,
        "params": {"init1": 1.0, "t": 10.0, "horizon": 1.0, "particles": 1000, "n_paths": 2000},
    },
    "rate": {
        "mechanism": FELLER,
        "competition": LOGISTIC,
        "params": {"init1": 1.0, "init2": 5.0, "t_grid": "0.5,1,2,3,4,6", "particles": 1000},
    },
}


def generate_config(kind: str, seed: Optional[int] = None) -> dict[str, Any]:
    """Nested config for ``kind`` (a seed is added for stochastic kinds)."""
    if kind not in TEMPLATES:
        raise ValueError(f"unknown experiment {kind!r}; use one of {EXPERIMENT_KINDS}")
    config: dict[str, Any] = {"experiment": kind}
    if kind in STOCHASTIC_KINDS:
        config["seed"] = 20240101 if seed is None else seed
    config["output"] = f"out-{kind}"
    for section, values in TEMPLATES[kind].items():
        if values:
            config[section] = dict(values)
    return config


def _render_section(prefix: str, data: dict[str, Any], lines: list[str]) -> None:
    scalars = {k: v for k, v in data.items() if not isinstance(v, dict)}
    if scalars:
        if prefix:
            lines.append("")
            lines.append(f"[{prefix}]")
        for key, value in scalars.items():
            lines.append(f"{key} = {value}")
    for key, value in data.items():
        if isinstance(value, dict):
            _render_section(f"{prefix}.{key}" if prefix else key, value, lines)


def render_key_value(config: dict[str, Any]) -> str:
    """Render a nested config in the plain ``key = value`` format."""
    lines = [f"# cbc-lab {config['experiment']} experiment"]
    _render_section("", config, lines)
    return "\n".join(lines) + "\n"


def render_yaml(config: dict[str, Any]) -> str:
    if yaml is None:
        raise RuntimeError("PyYAML is required for YAML output")
    return yaml.safe_dump(config, sort_keys=False)


def main(argv: Optional[list[str]] = None) -> int:
    """Print a config template for the requested experiment."""
    parser = argparse.ArgumentParser(
        prog="cbc-lab-config", description="Print a template config for a cbc-lab experiment"
    )
    parser.add_argument("kind", choices=EXPERIMENT_KINDS, help="experiment kind")
    parser.add_argument("--seed", type=int, help="seed for stochastic experiments")
    parser.add_argument("--yaml", action="store_true", help="emit YAML instead of key = value")
    args = parser.parse_args(argv)

    config = generate_config(args.kind, args.seed)
    text = render_yaml(config) if args.yaml else render_key_value(config)
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
