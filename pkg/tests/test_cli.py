"""Tests for cbc_lab.cli module."""

import json
from unittest.mock import patch

import pytest

from cbc_lab.cli import build_parser, main
from cbc_lab.core.models import ExperimentOutcome


FLOW = """\
experiment = flow
output = {out}

[mechanism]
kind = feller
c = 1.0
"""


@pytest.fixture
def flow_file(write_config, tmp_path):
    return write_config(FLOW.format(out=tmp_path / "from-file"))


class TestCLI:
    """Test CLI module functionality."""

    def test_cli_imports(self):
        """Test that CLI module can be imported."""
        assert callable(main)

    def test_parser_subcommands(self):
        """Test that every experiment kind has a subcommand."""
        parser = build_parser()
        args = parser.parse_args(["rate", "--config", "x.cfg", "--seed", "5", "--threads", "2"])
        assert (args.command, args.seed, args.threads) == ("rate", 5, 2)
        with pytest.raises(SystemExit):
            parser.parse_args(["teleport", "--config", "x.cfg"])

    def test_validate(self, flow_file, capsys):
        """Test that validate reports success and the config hash."""
        assert main(["validate", "--config", flow_file]) == 0
        out = capsys.readouterr().out
        assert "[SUCCESS] validate: flow config is valid" in out
        assert "sha256" in out

    def test_validate_compact(self, flow_file, capsys):
        """Test the compact console format."""
        assert main(["validate", "--config", flow_file, "--format", "compact"]) == 0
        assert capsys.readouterr().out.strip() == "OK: validate - flow config is valid"

    def test_invalid_config(self, write_config, capsys):
        """Test that every diagnostic is printed with its position."""
        path = write_config("experiment = flow\n[params]\ndt = abc\n")
        assert main(["validate", "--config", path]) == 1
        err = capsys.readouterr().err
        assert f"{path}: line 3, column 1 [params.dt]: expected float, got 'abc'" in err

    def test_bad_assignment(self, flow_file, capsys):
        """Test that a malformed --set exits with the config code."""
        assert main(["validate", "--config", flow_file, "--set", "x"]) == 1
        assert "--set: expected KEY=VALUE, got 'x'" in capsys.readouterr().err

    def test_seed_required(self, flow_file, capsys):
        """Test that stochastic subcommands demand a seed."""
        assert main(["simulate", "--config", flow_file]) == 1
        assert "seed is mandatory for the simulate experiment" in capsys.readouterr().err

    @pytest.mark.integration
    def test_flow_run(self, flow_file, tmp_path, capsys):
        """Test a full flow run with overrides."""
        out = tmp_path / "run"
        code = main(["flow", "--config", flow_file, "--out", str(out), "--set", "params.lambda=2"])

        assert code == 0
        assert "[SUCCESS] flow" in capsys.readouterr().out
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["exit_code"] == 0
        assert json.loads((out / "flow.json").read_text())["lambda"] == 2.0
        assert not (tmp_path / "from-file").exists()

    @patch("cbc_lab.cli.run_experiment")
    def test_run_arguments(self, mock_run, flow_file, tmp_path):
        """Test that command-line values reach the experiment config."""
        mock_run.return_value = ExperimentOutcome(experiment="simulate", exit_code=3, message="failed")
        code = main(
            ["simulate", "--config", flow_file, "--seed", "9", "--threads", "2", "--timeout", "30"]
        )

        assert code == 3
        config, out_dir, timeout = mock_run.call_args.args
        assert (config.experiment, config.seed, config.threads) == ("simulate", 9, 2)
        assert out_dir == tmp_path / "from-file"
        assert timeout == 30.0

    @patch("cbc_lab.cli.run_experiment")
    def test_timeout_exit_code(self, mock_run, flow_file):
        """Test that a timed-out run returns 124."""
        mock_run.return_value = ExperimentOutcome(experiment="flow", exit_code=124, message="timed out after 1s")
        assert main(["flow", "--config", flow_file, "--timeout", "1"]) == 124
