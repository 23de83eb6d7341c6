"""Tests for odskit.config_loader module."""

import os
from pathlib import Path

import pytest

from odskit.config_loader import (
    ConfigError, _get_config_search_paths, _interpolate, _parse_config, apply_overrides, load_config,
    parse_document,
)
from odskit.config_schema import ExperimentConfig

FIXTURES = Path(__file__).parent.parent / "fixtures"


class TestInterpolate:
    """Tests for _interpolate function."""

    def test_returns_none_for_none(self):
        assert _interpolate(None) is None

    def test_returns_non_string_unchanged(self):
        assert _interpolate(123) == 123
        assert _interpolate(True) is True

    def test_interpolates_env_var_in_string(self, monkeypatch):
        monkeypatch.setenv("RUNS", "/data/runs")
        assert _interpolate("${RUNS}/exp1") == "/data/runs/exp1"

    def test_interpolates_nested_values(self, monkeypatch):
        monkeypatch.setenv("OUT", "/tmp/out")
        raw = {"output_dir": "${OUT}", "attacks": [{"name": "${OUT}-a"}]}
        assert _interpolate(raw) == {"output_dir": "/tmp/out", "attacks": [{"name": "/tmp/out-a"}]}

    def test_raises_for_missing_env_var(self):
        os.environ.pop("NONEXISTENT_VAR", None)
        with pytest.raises(ConfigError, match="Environment variable not set"):
            _interpolate("${NONEXISTENT_VAR}")


class TestParseConfig:
    """Tests for _parse_config function."""

    def test_parses_valid_config(self):
        config = _parse_config(FIXTURES / "valid_config.yaml")

        assert config.seed == 3
        assert config.jobs == 2
        assert config.budgets == [50, 100]
        assert config.dataset.dim == 8
        assert config.target.model.hidden == [16]
        assert config.target.model.train.schedule == [(0, 0.01), (3, 0.001)]
        assert config.target.robust.steps == 2
        assert [s.name for s in config.surrogates] == ["surrogate-a", "ood-surrogate"]
        assert config.surrogates[1].ood
        assert config.surrogates[1].train.adversarial.steps == 1
        assert config.diversity.restarts == 3

    def test_parses_attacks(self):
        config = _parse_config(FIXTURES / "valid_config.yaml")
        pgd, boundary = config.attacks
        assert pgd.target == "robust"
        assert pgd.family == "pgd"
        assert pgd.whitebox.init == "odi"
        assert boundary.family == "boundary"
        assert boundary.blackbox.surrogates == "ood"

    def test_parses_shipped_example(self):
        config = _parse_config(FIXTURES.parent.parent / "odskit.example.yaml")
        attacks = {a.name: a for a in config.attacks}
        assert attacks["simba-ods-single"].blackbox.surrogate_names == ["surrogate-a"]
        assert attacks["simba-ods"].blackbox.surrogate_names is None
        assert attacks["cw-odi"].whitebox.norm == "l2"
        assert attacks["rgf-ods-l2"].blackbox.samples == 4

    def test_rejects_unknown_surrogate_name(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text(
            "surrogates:\n  - name: surrogate-a\n"
            "attacks:\n  - name: simba-one\n    blackbox: {surrogate_names: [surrogate-z]}\n"
        )
        with pytest.raises(ConfigError, match="surrogate-z"):
            _parse_config(path)

    def test_parses_minimal_config_with_defaults(self):
        config = _parse_config(FIXTURES / "minimal_config.yaml")
        assert config.dataset.classes == 3
        assert config.attacks == []
        assert config.output_dir == ExperimentConfig().output_dir

    def test_empty_file_gives_defaults(self, tmp_path):
        config_file = tmp_path / "empty.yaml"
        config_file.write_text("")
        assert _parse_config(config_file) == ExperimentConfig()

    def test_raises_for_invalid_yaml(self, tmp_path):
        config_file = tmp_path / "invalid.yaml"
        config_file.write_text("invalid: yaml: content: [unclosed")
        with pytest.raises(ConfigError, match="Invalid YAML"):
            _parse_config(config_file)

    def test_raises_for_non_dict_yaml(self, tmp_path):
        config_file = tmp_path / "list.yaml"
        config_file.write_text("- item1\n- item2")
        with pytest.raises(ConfigError, match="must be a YAML mapping"):
            _parse_config(config_file)


class TestParseDocument:
    """Tests for parse_document function."""

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="Unknown key.*instances"):
            parse_document({"instances": {}})

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError, match="Unknown key.*pixels"):
            parse_document({"dataset": {"pixels": 3}})

    def test_invalid_value_names_section(self):
        with pytest.raises(ConfigError, match="Invalid dataset"):
            parse_document({"dataset": {"dim": 1}})

    def test_attack_needs_name(self):
        with pytest.raises(ConfigError, match="'name'"):
            parse_document({"attacks": [{"whitebox": {}}]})

    def test_attack_needs_one_kind(self):
        with pytest.raises(ConfigError, match="attack 'x'"):
            parse_document({"attacks": [{"name": "x"}]})

    def test_invalid_attack_settings(self):
        with pytest.raises(ConfigError, match="attack 'b'.blackbox"):
            parse_document({"attacks": [{"name": "b", "blackbox": {"attack": "boundary", "sampler": "pixel"}}]})

    def test_robust_can_be_disabled(self):
        assert parse_document({"target": {"robust": None}}).target.robust is None
        assert parse_document({"target": {"robust": False}}).target.robust is None

    def test_lists_required(self):
        with pytest.raises(ConfigError, match="must be lists"):
            parse_document({"attacks": {"name": "a"}})

    def test_section_must_be_mapping(self):
        with pytest.raises(ConfigError, match="must be a mapping"):
            parse_document({"dataset": [1, 2]})


class TestApplyOverrides:
    """Tests for apply_overrides function."""

    def test_cli_flags_win(self):
        config = apply_overrides(ExperimentConfig(seed=1), seed=7, out="/tmp/x", jobs=3)
        assert (config.seed, config.output_dir, config.jobs) == (7, "/tmp/x", 3)

    def test_no_flags_keeps_config(self):
        config = ExperimentConfig(seed=1)
        assert apply_overrides(config) is config

    def test_rejects_zero_jobs(self):
        with pytest.raises(ConfigError, match="--jobs"):
            apply_overrides(ExperimentConfig(), jobs=0)


class TestLoadConfig:
    """Tests for load_config function."""

    def test_loads_from_cli_path(self):
        config = load_config(cli_path=str(FIXTURES / "valid_config.yaml"))
        assert config.seed == 3

    def test_raises_for_nonexistent_cli_path(self):
        with pytest.raises(ConfigError, match="Config file not found"):
            load_config(cli_path="/nonexistent/path/config.yaml")

    def test_raises_when_no_config_found(self, tmp_path, monkeypatch):
        monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
        monkeypatch.setenv("HOME", str(tmp_path / "home"))
        monkeypatch.chdir(tmp_path)
        with pytest.raises(ConfigError, match="No config file found"):
            load_config()

    def test_loads_from_current_directory(self, tmp_path, monkeypatch):
        (tmp_path / "odskit.yaml").write_text("seed: 11\n")
        monkeypatch.chdir(tmp_path)
        assert load_config().seed == 11


class TestGetConfigPaths:
    """Tests for config path resolution."""

    def test_xdg_config_home_takes_priority(self, tmp_path, monkeypatch):
        config_file = tmp_path / "xdg" / "odskit" / "config.yaml"
        config_file.parent.mkdir(parents=True)
        config_file.write_text("seed: 21\n")
        monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
        monkeypatch.chdir(tmp_path)

        assert load_config().seed == 21

    def test_falls_back_to_home_config_when_no_xdg(self, tmp_path, monkeypatch):
        monkeypatch.delenv("XDG_CONFIG_HOME", raising=False)
        config_dir = tmp_path / "home" / ".config" / "odskit"
        config_dir.mkdir(parents=True)
        (config_dir / "config.yaml").write_text("seed: 22\n")
        monkeypatch.setenv("HOME", str(tmp_path / "home"))
        monkeypatch.chdir(tmp_path)

        assert load_config().seed == 22

    def test_search_order(self, tmp_path, monkeypatch):
        monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
        monkeypatch.setenv("HOME", str(tmp_path / "home"))
        assert _get_config_search_paths() == [
            Path("./odskit.yaml"),
            tmp_path / "xdg" / "odskit" / "config.yaml",
            tmp_path / "home" / ".config" / "odskit" / "config.yaml",
        ]
