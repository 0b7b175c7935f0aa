"""Tests for cbc_lab.services.workspace module."""

import hashlib
import json
import math

import numpy as np
import pytest

from cbc_lab.core.errors import ConfigError, PreconditionError
from cbc_lab.mechanism import LogisticCompetition, TruncatedStable
from cbc_lab.services.workspace import (
    ArtifactWriter,
    collect_artifacts,
    load_config_file,
    parse_floats,
    parse_pairs,
    validate_config,
    write_manifest,
)


FLOW_CONFIG = """\
# Feller flow
experiment = flow

[mechanism]
kind = feller
c = 1.0

[params]
lambda = 2.0
t_max = 3.0
"""


def diagnostics(error: ConfigError) -> list[tuple]:
    return [(d.message, d.key, d.line, d.column) for d in error.diagnostics]


class TestConfigFiles:
    """Test reading config files in each supported format."""

    def test_key_value_sections(self, write_config):
        """Test dotted keys and positions of the plain format."""
        values, positions = load_config_file(write_config(FLOW_CONFIG))

        assert values["experiment"] == "flow"
        assert values["mechanism.kind"] == "feller"
        assert values["params.t_max"] == "3.0"
        assert positions["mechanism.c"] == (6, 1)

    def test_key_value_quotes_and_comments(self, write_config):
        """Test quoted values and trailing comments."""
        values, positions = load_config_file(write_config('  output = "runs/a"  # target\n'))
        assert values == {"output": "runs/a"}
        assert positions["output"] == (1, 3)

    def test_key_value_errors(self, write_config):
        """Test that every syntax problem is reported with its position."""
        text = "[params\nno equals here\n= 3\nseed = 1\nseed = 2\n"
        with pytest.raises(ConfigError) as excinfo:
            load_config_file(write_config(text))

        assert diagnostics(excinfo.value) == [
            ("malformed section header", None, 1, 1),
            ("expected 'key = value'", None, 2, 1),
            ("missing key before '='", None, 3, 1),
            ("duplicate key", "seed", 5, 1),
        ]

    def test_toml(self, write_config):
        """Test that TOML tables flatten to dotted keys."""
        text = 'experiment = "flow"\n[mechanism]\nkind = "feller"\nc = 1.0\n'
        values, positions = load_config_file(write_config(text, "experiment.toml"))
        assert values == {"experiment": "flow", "mechanism.kind": "feller", "mechanism.c": 1.0}
        assert positions == {}

    def test_toml_error_position(self, write_config):
        """Test that TOML syntax errors keep their line."""
        with pytest.raises(ConfigError) as excinfo:
            load_config_file(write_config('experiment = "flow\n', "broken.toml"))
        assert excinfo.value.diagnostics[0].line == 1

    def test_yaml(self, write_config):
        """Test YAML mappings, including lists of pairs."""
        text = "experiment: conditions\nmechanism:\n  mu:\n    kind: atoms\n    atoms: [[0.5, 1.0], [2.0, 0.5]]\n"
        values, _ = load_config_file(write_config(text, "experiment.yaml"))
        assert values["mechanism.mu.atoms"] == "0.5:1.0,2.0:0.5"

    def test_yaml_must_be_mapping(self, write_config):
        """Test that a YAML list is rejected."""
        with pytest.raises(ConfigError, match="mapping"):
            load_config_file(write_config("- 1\n- 2\n", "experiment.yml"))

    def test_missing_file(self, tmp_path):
        """Test an unreadable path."""
        with pytest.raises(ConfigError, match="cannot read"):
            load_config_file(str(tmp_path / "absent.cfg"))

    def test_parse_helpers(self):
        """Test pair and float list parsing."""
        assert parse_pairs("1:2, 3:4") == ((1.0, 2.0), (3.0, 4.0))
        assert parse_pairs("") == ()
        with pytest.raises(PreconditionError, match="z:w"):
            parse_pairs("1:2, 3")
        assert parse_floats("1, 2.5,4") == [1.0, 2.5, 4.0]


class TestValidateConfig:
    """Test config validation and precedence."""

    def test_flow_config(self, write_config, monkeypatch):
        """Test a valid analytic config."""
        monkeypatch.delenv("CBC_LAB_THREADS", raising=False)
        config = validate_config(write_config(FLOW_CONFIG))

        assert config.experiment == "flow"
        assert config.mechanism.c == 1.0
        assert config.mechanism.mu.kind == "zero"
        assert config.param("lambda") == 2.0
        assert config.seed is None
        assert not config.stochastic
        assert config.threads == 1

    def test_unknown_key_and_type_errors(self, write_config):
        """Test that all problems are reported together with positions."""
        text = "experiment = flow\nbogus = 1\n[params]\ndt = abc\n"
        with pytest.raises(ConfigError) as excinfo:
            validate_config(write_config(text))

        assert diagnostics(excinfo.value) == [
            ("unknown key", "bogus", 2, 1),
            ("expected float, got 'abc'", "params.dt", 4, 1),
        ]

    def test_missing_experiment(self):
        """Test that the experiment kind is required."""
        with pytest.raises(ConfigError, match="missing experiment kind"):
            validate_config(values={})

    def test_unknown_experiment(self):
        """Test an unsupported experiment kind."""
        with pytest.raises(ConfigError, match="unknown experiment"):
            validate_config(values={"experiment": "teleport"})

    def test_seed_required_for_stochastic(self):
        """Test that stochastic experiments need a seed."""
        with pytest.raises(ConfigError) as excinfo:
            validate_config(values={"experiment": "simulate"})
        assert diagnostics(excinfo.value) == [
            ("seed is mandatory for the simulate experiment", "seed", None, None)
        ]
        config = validate_config(values={"experiment": "simulate", "seed": "42"})
        assert config.seed == 42
        assert config.stochastic

    def test_parameter_ranges(self):
        """Test numeric range checks on parameters."""
        with pytest.raises(ConfigError) as excinfo:
            validate_config(values={"experiment": "flow", "params.dt": -1, "params.eps": 2})
        messages = [d.message for d in excinfo.value.diagnostics]
        assert "Δt must be > 0" in messages
        assert "ε must lie in (0, 1]" in messages

    def test_bad_grid(self):
        """Test a malformed time grid."""
        with pytest.raises(ConfigError, match="comma-separated"):
            validate_config(values={"experiment": "rate", "seed": 1, "params.t_grid": "1,x"})

    def test_builder_errors(self):
        """Test that invalid domain objects are reported under their section."""
        values = {"experiment": "flow", "competition.kind": "power", "competition.a": -1}
        with pytest.raises(ConfigError) as excinfo:
            validate_config(values=values)
        (problem,) = excinfo.value.diagnostics
        assert problem.key == "competition"
        assert "decreases" in problem.message

    def test_measure_and_competition(self):
        """Test building a custom mechanism and competition."""
        config = validate_config(
            values={
                "experiment": "conditions",
                "mechanism.mu.kind": "truncated_stable",
                "mechanism.mu.beta": "1.2",
                "competition.kind": "logistic",
                "competition.a": "2",
            }
        )
        assert config.mechanism.mu == TruncatedStable(C=1.0, beta=1.2)
        assert config.competition == LogisticCompetition(a=2.0)

    def test_alpha_hypotheses(self):
        """Test that α is checked against the growth of g."""
        base = {"experiment": "lyapunov", "mechanism.kind": "feller", "mechanism.c": 1.0}
        with pytest.raises(ConfigError, match="do not meet"):
            validate_config(values={**base, "params.alpha": 1.5})
        with pytest.raises(ConfigError) as excinfo:
            validate_config(values={**base, "competition.kind": "logistic", "params.alpha": 2.5})
        assert excinfo.value.diagnostics[0].key == "params.alpha"

        config = validate_config(values={**base, "competition.kind": "logistic", "params.alpha": 1.5})
        assert config.warnings == []

    def test_threads_precedence(self, monkeypatch, write_config):
        """Test command line > file > environment > default."""
        monkeypatch.setenv("CBC_LAB_THREADS", "4")
        assert validate_config(values={"experiment": "flow"}).threads == 4
        assert validate_config(values={"experiment": "flow", "threads": 2}).threads == 2

        path = write_config("experiment = flow\nthreads = 2\n")
        assert validate_config(path).threads == 2
        assert validate_config(path, overrides={"threads": "3"}).threads == 3

    def test_overrides(self, write_config):
        """Test command-line overrides of file values."""
        config = validate_config(
            write_config(FLOW_CONFIG), overrides={"params.lambda": "5", "seed": None}
        )
        assert config.param("lambda") == 5.0
        assert config.source.endswith("experiment.cfg")

    def test_sim_config_and_hash(self):
        """Test derived simulation settings and the canonical hash."""
        config = validate_config(values={"experiment": "simulate", "seed": 9, "params.dt": 0.05})
        cfg = config.sim_config(stream=2, horizon=3.0)
        assert (cfg.seed, cfg.stream, cfg.dt, cfg.horizon) == (9, 2, 0.05, 3.0)

        same = validate_config(values={"experiment": "simulate", "seed": 9, "params.dt": "0.05"})
        other = validate_config(values={"experiment": "simulate", "seed": 10, "params.dt": 0.05})
        assert config.sha256 == same.sha256
        assert config.sha256 != other.sha256
        assert json.loads(config.canonical())["seed"] == 9
        assert config.float_list("t_grid") == [1.0, 2.0, 4.0, 6.0]


class TestArtifacts:
    """Test artifact and manifest writing."""

    def test_write_csv(self, tmp_path):
        """Test cell formatting and the recorded hash."""
        writer = ArtifactWriter(tmp_path / "out")
        record = writer.write_csv("table.csv", ["a", "b", "c", "d"], [(0.1, math.inf, True, None), (2, "x", False, 1e-300)])

        content = (tmp_path / "out" / "table.csv").read_bytes()
        assert content.decode() == "a,b,c,d\n0.10000000000000001,inf,true,\n2,x,false,1e-300\n"
        assert float(content.decode().strip().rsplit(",", 1)[-1]) == 1e-300
        assert record.path == "table.csv"
        assert record.sha256 == hashlib.sha256(content).hexdigest()
        assert writer.records == [record]

    def test_write_json(self, tmp_path):
        """Test sorted keys, numpy values and non-finite numbers."""
        writer = ArtifactWriter(tmp_path)
        writer.write_json("data.json", {"b": math.inf, "a": np.float64(1.5), "arr": np.array([1, 2])})
        data = json.loads((tmp_path / "data.json").read_text())
        assert data == {"a": 1.5, "arr": [1, 2], "b": None}
        assert (tmp_path / "data.json").read_text().startswith('{\n  "a"')

    def test_manifest(self, tmp_path):
        """Test manifest contents and artifact collection."""
        config = validate_config(values={"experiment": "flow"})
        writer = ArtifactWriter(tmp_path)
        writer.write_json("b.json", {})
        writer.write_csv("a.csv", ["x"], [(1.0,)])

        target = write_manifest(tmp_path, config, writer.records, 1.23456789, 0)
        manifest = json.loads(target.read_text())

        assert target.name == "manifest.json"
        assert manifest["experiment"] == "flow"
        assert manifest["config_sha256"] == config.sha256
        assert manifest["exit_code"] == 0
        assert manifest["wall_time"] == 1.234568
        assert set(manifest["versions"]) == {"cbc_lab", "numpy", "scipy", "python"}
        assert [a["path"] for a in manifest["artifacts"]] == ["b.json", "a.csv"]

        collected = collect_artifacts(tmp_path)
        assert [r.path for r in collected] == ["a.csv", "b.json"]
        assert {r.sha256 for r in collected} == {r.sha256 for r in writer.records}
