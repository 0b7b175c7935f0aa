"""Tests for config_generator module."""

import pytest
import yaml

from cbc_lab.config.constants import EXPERIMENT_KINDS, STOCHASTIC_KINDS
from cbc_lab.config_generator import generate_config, main, render_key_value, render_yaml
from cbc_lab.services.workspace import validate_config


class TestConfigGenerator:
    """Test config generator functionality."""

    def test_generate_config(self):
        """Test the nested structure of a template."""
        config = generate_config("flow")
        assert config["experiment"] == "flow"
        assert config["output"] == "out-flow"
        assert config["mechanism"]["kind"] == "feller"
        assert "seed" not in config

    def test_seed_for_stochastic(self):
        """Test that stochastic templates carry a seed."""
        assert generate_config("qsd")["seed"] == 20240101
        assert generate_config("qsd", seed=3)["seed"] == 3

    def test_unknown_kind(self):
        """Test that unknown kinds are rejected."""
        with pytest.raises(ValueError, match="unknown experiment"):
            generate_config("teleport")

    def test_render_key_value(self):
        """Test the plain format layout."""
        text = render_key_value(generate_config("lamperti"))
        assert text.startswith("# cbc-lab lamperti experiment\n")
        assert "\n[mechanism.mu]\nkind = truncated_stable\n" in text

    @pytest.mark.parametrize("kind", EXPERIMENT_KINDS)
    def test_templates_validate(self, kind, write_config):
        """Test that every key = value template passes validation."""
        path = write_config(render_key_value(generate_config(kind)))
        config = validate_config(path)
        assert config.experiment == kind
        assert config.stochastic == (kind in STOCHASTIC_KINDS)

    @pytest.mark.parametrize("kind", EXPERIMENT_KINDS)
    def test_yaml_templates_validate(self, kind, write_config):
        """Test that every YAML template passes validation."""
        text = render_yaml(generate_config(kind))
        assert yaml.safe_load(text)["experiment"] == kind
        assert validate_config(write_config(text, "experiment.yaml")).experiment == kind

    def test_main(self, capsys):
        """Test the command-line entry point."""
        assert main(["couple", "--seed", "4"]) == 0
        out = capsys.readouterr().out
        assert "experiment = couple" in out
        assert "seed = 4" in out

        assert main(["rate", "--yaml"]) == 0
        assert yaml.safe_load(capsys.readouterr().out)["experiment"] == "rate"
