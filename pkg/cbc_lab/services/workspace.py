"""Experiment configuration files, validation, and artifact/manifest writing."""

import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..config.constants import (
    COMPETITION_KINDS,
    CONFIG_SCHEMA,
    EXPERIMENT_KINDS,
    GROWTH_KINDS,
    MANIFEST_NAME,
    MEASURE_KINDS,
    MECHANISM_PRESETS,
    STOCHASTIC_KINDS,
    THREADS_ENV_VAR,
)
from ..core.errors import ConfigError, Diagnostic, PreconditionError
from ..core.interfaces import CompetitionFunction, GrowthFunction
from ..core.models import ArtifactRecord, Verdict
from ..mechanism.branching import BranchingMechanism
from ..mechanism.competition import (
    LinearCompetition,
    LogisticCompetition,
    LogPowerGrowth,
    PowerCompetition,
    PowerGrowth,
    ZeroCompetition,
    check_competition,
)
from ..mechanism.conditions import qsd_hypotheses_check
from ..mechanism.levy import (
    FiniteAtoms,
    MeasureBase,
    Neveu,
    Stable,
    TabulatedDensity,
    TemperedStable,
    TruncatedStable,
    ZeroMeasure,
)
from ..simulator.config import SimConfig


logger = logging.getLogger(__name__)

# Optional imports with graceful fallback
try:
    import tomllib
except ImportError:
    try:
        import tomli as tomllib  # fallback for Python < 3.11
    except ImportError:
        tomllib = None

try:
    import yaml
except ImportError:
    yaml = None

Position = tuple[Optional[int], Optional[int]]

_TOML_POSITION = re.compile(r"line (\d+), column (\d+)")


def _flatten(data: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            # Lists become the comma-separated text form; pairs become "a:b"
            items = [
                ":".join(str(v) for v in item) if isinstance(item, (list, tuple)) else str(item)
                for item in value
            ]
            flat[name] = ",".join(items)
        else:
            flat[name] = value
    return flat


def _parse_key_value(text: str) -> tuple[dict[str, Any], dict[str, Position]]:
    """Parse the plain ``key = value`` format with ``[section]`` prefixes."""
    values: dict[str, Any] = {}
    positions: dict[str, Position] = {}
    problems: list[Diagnostic] = []
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        column = raw.index(line[0]) + 1
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                problems.append(Diagnostic("malformed section header", line=lineno, column=column))
                continue
            section = line[1:-1].strip() + "."
            continue
        if "=" not in line:
            problems.append(Diagnostic("expected 'key = value'", line=lineno, column=column))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            problems.append(Diagnostic("missing key before '='", line=lineno, column=column))
            continue
        name = f"{section}{key}"
        if name in values:
            problems.append(Diagnostic("duplicate key", key=name, line=lineno, column=column))
            continue
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[name] = value
        positions[name] = (lineno, column)
    if problems:
        raise ConfigError(problems)
    return values, positions


def load_config_file(path: str) -> tuple[dict[str, Any], dict[str, Position]]:
    """
    Read an experiment file into a flat dotted-key mapping.

    Args:
        path: ``.toml``, ``.yaml``/``.yml`` or plain ``key = value`` file

    Returns:
        (flat values, source positions per key where known)
    """
    file_path = Path(path)
    try:
        text = file_path.read_text()
    except OSError as e:
        raise ConfigError([Diagnostic(f"cannot read {path}: {e}")]) from e

    if file_path.suffix == ".toml":
        if tomllib is None:
            raise ConfigError([Diagnostic("TOML configs need tomli on Python < 3.11")])
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            match = _TOML_POSITION.search(str(e))
            line, column = (int(match.group(1)), int(match.group(2))) if match else (None, None)
            raise ConfigError([Diagnostic(str(e), line=line, column=column)]) from e
        return _flatten(data), {}

    if file_path.suffix in {".yaml", ".yml"}:
        if yaml is None:
            raise ConfigError([Diagnostic("YAML configs need PyYAML")])
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            column = mark.column + 1 if mark is not None else None
            raise ConfigError([Diagnostic(f"invalid YAML: {e}", line=line, column=column)]) from e
        if not isinstance(data, dict):
            raise ConfigError([Diagnostic("YAML config must be a mapping")])
        return _flatten(data), {}

    return _parse_key_value(text)


def parse_pairs(text: str) -> tuple[tuple[float, float], ...]:
    """Parse ``"z:w, z:w"`` into float pairs."""
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        left, sep, right = item.partition(":")
        if not sep:
            raise PreconditionError(f"expected 'z:w', got {item!r}")
        pairs.append((float(left), float(right)))
    return tuple(pairs)


def parse_floats(text: str) -> list[float]:
    return [float(item) for item in str(text).split(",") if item.strip()]


def build_measure(flat: dict[str, Any]) -> MeasureBase:
    kind = flat["mechanism.mu.kind"]
    C, beta = flat["mechanism.mu.C"], flat["mechanism.mu.beta"]
    if kind == "zero":
        return ZeroMeasure()
    if kind == "truncated_stable":
        return TruncatedStable(C=C, beta=beta)
    if kind == "stable":
        return Stable(C=C, beta=beta)
    if kind == "neveu":
        return Neveu(C=C)
    if kind == "tempered_stable":
        return TemperedStable(C=C, beta=beta, lambda0=flat["mechanism.mu.lambda0"])
    if kind == "atoms":
        return FiniteAtoms(points=parse_pairs(flat.get("mechanism.mu.atoms") or ""))
    if kind == "tabulated":
        table = parse_pairs(flat.get("mechanism.mu.grid") or "")
        extra = {}
        if flat.get("mechanism.mu.small_exponent") is not None:
            extra["small_z_exponent"] = flat["mechanism.mu.small_exponent"]
        if flat.get("mechanism.mu.tail_exponent") is not None:
            extra["tail_z_exponent"] = flat["mechanism.mu.tail_exponent"]
        return TabulatedDensity(
            grid=tuple(z for z, _ in table), values=tuple(m for _, m in table), **extra
        )
    raise PreconditionError(f"unknown measure kind {kind!r}; use one of {MEASURE_KINDS}")


def build_mechanism(flat: dict[str, Any]) -> BranchingMechanism:
    preset = flat["mechanism.kind"]
    b, c = flat["mechanism.b"], flat["mechanism.c"]
    if preset == "feller":
        return BranchingMechanism(b=b, c=c, mu=ZeroMeasure())
    if preset == "neveu":
        return BranchingMechanism(b=b, c=c, mu=Neveu(C=flat["mechanism.mu.C"]))
    if preset == "custom":
        return BranchingMechanism(b=b, c=c, mu=build_measure(flat))
    raise PreconditionError(f"unknown mechanism kind {preset!r}; use one of {MECHANISM_PRESETS}")


def build_competition(flat: dict[str, Any]) -> CompetitionFunction:
    kind = flat["competition.kind"]
    a, p, theta = flat["competition.a"], flat["competition.p"], flat.get("competition.theta")
    if kind == "zero":
        g: CompetitionFunction = ZeroCompetition()
    elif kind in {"power", "logistic"}:
        if a < 0:
            raise PreconditionError(
                "g is a continuous and non-decreasing function with g(0) = 0; "
                f"a·x^p with a={a} decreases"
            )
        g = LogisticCompetition(a=a) if kind == "logistic" else PowerCompetition(a=a, p=p, declared_theta=theta)
    elif kind == "linear":
        g = LinearCompetition(h=flat["competition.h"])
    else:
        raise PreconditionError(f"unknown competition kind {kind!r}; use one of {COMPETITION_KINDS}")
    check_competition(g)
    return g


def build_growth(flat: dict[str, Any]) -> GrowthFunction:
    kind = flat["growth.kind"]
    if kind == "log_power":
        return LogPowerGrowth(p=flat["growth.p"])
    if kind == "power":
        return PowerGrowth(q=flat["growth.q"])
    raise PreconditionError(f"unknown growth kind {kind!r}; use one of {GROWTH_KINDS}")


@dataclass
class ExperimentConfig:
    """A validated experiment: domain objects plus the flat key mapping it came from."""

    experiment: str
    mechanism: BranchingMechanism
    competition: CompetitionFunction
    growth: GrowthFunction
    values: dict[str, Any]
    seed: Optional[int] = None
    output: str = "cbc-lab-out"
    threads: int = 1
    source: Optional[str] = None
    warnings: list[str] = field(default_factory=list)

    @property
    def stochastic(self) -> bool:
        return self.experiment in STOCHASTIC_KINDS

    def param(self, name: str) -> Any:
        return self.values[f"params.{name}"]

    def float_list(self, name: str) -> list[float]:
        return parse_floats(self.param(name))

    def sim_config(self, stream: int = 0, horizon: Optional[float] = None) -> SimConfig:
        return SimConfig(
            dt=self.param("dt"),
            eps=self.param("eps"),
            horizon=horizon if horizon is not None else self.param("horizon"),
            seed=self.seed or 0,
            stream=stream,
        )

    def canonical(self) -> str:
        """Canonical JSON of the flat configuration (stable key order)."""
        return json.dumps(self.values, sort_keys=True, default=str)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _coerce(key: str, value: Any, position: Position) -> tuple[Any, Optional[Diagnostic]]:
    expected, _ = CONFIG_SCHEMA[key]
    line, column = position
    if value is None:
        return None, None
    try:
        if expected is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(str(value).strip()) if isinstance(value, str) else int(value), None
        if expected is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value), None
        return str(value), None
    except (TypeError, ValueError):
        message = f"expected {expected.__name__}, got {value!r}"
        return None, Diagnostic(message, key=key, line=line, column=column)


def _check_params(flat: dict[str, Any], problems: list[Diagnostic]) -> None:
    def need(ok: bool, key: str, message: str) -> None:
        if not ok:
            problems.append(Diagnostic(message, key=key))

    need(flat["params.dt"] > 0, "params.dt", "Δt must be > 0")
    need(0 < flat["params.eps"] <= 1, "params.eps", "ε must lie in (0, 1]")
    need(flat["params.horizon"] > 0, "params.horizon", "horizon must be > 0")
    need(flat["params.n_paths"] >= 1, "params.n_paths", "n_paths must be ≥ 1")
    need(flat["params.lambda"] >= 0, "params.lambda", "λ must be ≥ 0")
    need(flat["params.t"] >= 0, "params.t", "t must be ≥ 0")
    need(flat["threads"] >= 1, "threads", "threads must be ≥ 1")
    for key in ("params.t_grid", "params.y_grid"):
        try:
            parse_floats(flat[key])
        except ValueError:
            problems.append(Diagnostic("expected comma-separated numbers", key=key))


def validate_config(path: Optional[str] = None, overrides: Optional[dict[str, Any]] = None,
                    values: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    """
    Parse and validate an experiment config, reporting every problem at once.

    Precedence: ``overrides`` (command line) > file > environment > schema defaults.

    Args:
        path: Config file (omit when ``values`` is given)
        overrides: Dotted keys set on the command line
        values: Already-parsed flat mapping (instead of a file)

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: with one Diagnostic per problem
    """
    positions: dict[str, Position] = {}
    if values is None:
        if path is None:
            raise ConfigError([Diagnostic("no config file given")])
        values, positions = load_config_file(path)
    raw = dict(values)
    env_threads = os.environ.get(THREADS_ENV_VAR)
    if env_threads and "threads" not in raw:
        raw["threads"] = env_threads
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    problems: list[Diagnostic] = []
    flat: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in CONFIG_SCHEMA:
            line, column = positions.get(key, (None, None))
            problems.append(Diagnostic("unknown key", key=key, line=line, column=column))
            continue
        coerced, problem = _coerce(key, value, positions.get(key, (None, None)))
        if problem:
            problems.append(problem)
        flat[key] = coerced
    for key, (_, default) in CONFIG_SCHEMA.items():
        if flat.get(key) is None:
            flat[key] = default

    experiment = flat["experiment"]
    if experiment is None:
        problems.append(Diagnostic("missing experiment kind", key="experiment"))
    elif experiment not in EXPERIMENT_KINDS:
        problems.append(
            Diagnostic(f"unknown experiment {experiment!r}; use one of {EXPERIMENT_KINDS}", key="experiment")
        )
    elif experiment in STOCHASTIC_KINDS and flat["seed"] is None:
        problems.append(Diagnostic(f"seed is mandatory for the {experiment} experiment", key="seed"))
    if flat["seed"] is not None and not 0 <= flat["seed"] < 2**64:
        problems.append(Diagnostic("seed must be a 64-bit unsigned integer", key="seed"))
    if problems:
        raise ConfigError(problems)

    _check_params(flat, problems)
    built: dict[str, Any] = {}
    for name, builder, key in (
        ("mechanism", build_mechanism, "mechanism"),
        ("competition", build_competition, "competition"),
        ("growth", build_growth, "growth"),
    ):
        try:
            built[name] = builder(flat)
        except (PreconditionError, ValueError) as e:
            problems.append(Diagnostic(str(e), key=key))
    if problems:
        raise ConfigError(problems)

    warnings: list[str] = []
    alpha = flat["params.alpha"]
    if experiment in {"lyapunov", "qsd", "rate"} and alpha is not None:
        try:
            report = qsd_hypotheses_check(
                built["mechanism"], built["competition"], built["growth"], alpha
            )
        except PreconditionError as e:
            raise ConfigError([Diagnostic(str(e), key="params.alpha")]) from e
        if report.verdict is Verdict.VIOLATED:
            raise ConfigError(
                [Diagnostic("α regime and growth of g do not meet the hypotheses", key="params.alpha")]
            )
        if report.verdict is Verdict.INCONCLUSIVE:
            warnings.append("hypotheses check inconclusive for the α regime")

    config = ExperimentConfig(
        experiment=experiment,
        mechanism=built["mechanism"],
        competition=built["competition"],
        growth=built["growth"],
        values=flat,
        seed=flat["seed"],
        output=flat["output"],
        threads=flat["threads"],
        source=path,
        warnings=warnings,
    )
    logger.info(f"validated {experiment} config (sha256 {config.sha256[:12]})")
    return config


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) and value > 0 else format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


class ArtifactWriter:
    """Writes CSV/JSON artifacts into one directory and records their hashes."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.records: list[ArtifactRecord] = []

    def _write(self, name: str, content: str) -> ArtifactRecord:
        target = self.out_dir / name
        data = content.encode()
        target.write_bytes(data)
        record = ArtifactRecord(path=name, sha256=hashlib.sha256(data).hexdigest())
        self.records.append(record)
        logger.debug(f"wrote {target} ({len(data)} bytes)")
        return record

    def write_csv(self, name: str, header: list[str], rows: list[tuple]) -> ArtifactRecord:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
        return self._write(name, buffer.getvalue())

    def write_json(self, name: str, data: Any) -> ArtifactRecord:
        return self._write(name, json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n")


def write_manifest(
    out_dir: Path,
    config: ExperimentConfig,
    records: list[ArtifactRecord],
    wall_time: float,
    exit_code: int,
) -> Path:
    """Write manifest.json listing every artifact with its content hash."""
    import scipy

    from .. import __version__

    manifest = {
        "experiment": config.experiment,
        "config_sha256": config.sha256,
        "seed": config.seed,
        "exit_code": exit_code,
        "wall_time": round(wall_time, 6),
        "versions": {
            "cbc_lab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "artifacts": [{"path": r.path, "sha256": r.sha256} for r in records],
    }
    target = Path(out_dir) / MANIFEST_NAME
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return target


def collect_artifacts(out_dir: Path) -> list[ArtifactRecord]:
    """Hash every file already in ``out_dir`` (except the manifest), sorted by name."""
    records = []
    for target in sorted(Path(out_dir).glob("*")):
        if target.is_file() and target.name != MANIFEST_NAME:
            records.append(
                ArtifactRecord(path=target.name, sha256=hashlib.sha256(target.read_bytes()).hexdigest())
            )
    return records
