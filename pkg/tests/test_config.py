"""
Tests for TOML configuration loading, validation and overrides.
"""

from pathlib import Path

import pytest

from tax_favar.core.config import build_config, load_config
from tax_favar.core.errors import ConfigError


def _raw(**sections):
    raw = {"paths": {"panel": "panel.csv", "events": "events.csv"}, "run": {"seed": 7}}
    for name, values in sections.items():
        raw.setdefault(name, {}).update(values)
    return raw


class TestBuildConfig:
    def test_defaults(self):
        config = build_config(_raw())
        assert config.seed == 7
        assert config.var.p == 4
        assert config.identify.horizon == 4
        assert config.identify.mode == "both"
        assert config.analysis.horizon == 20
        assert config.analysis.cumulative_horizons == [4, 12]
        assert config.identify.signs["UNEMP"] == "-"

    def test_seed_is_required(self):
        raw = _raw()
        del raw["run"]
        with pytest.raises(ConfigError, match="run"):
            build_config(raw)

    def test_overrides(self):
        config = build_config(_raw(), {"p": 2, "seed": 11, "mode": "penalty", "level": None})
        assert config.var.p == 2
        assert config.seed == 11
        assert config.identify.mode == "penalty"
        assert config.analysis.level == 0.9

    def test_unknown_override(self):
        with pytest.raises(ConfigError, match="Unknown override"):
            build_config(_raw(), {"lags": 2})

    def test_hash_stability(self):
        assert build_config(_raw()).config_hash() == build_config(_raw()).config_hash()
        assert build_config(_raw()).config_hash() != build_config(_raw(), {"p": 3}).config_hash()

    def test_r_above_r_max(self):
        with pytest.raises(ConfigError, match="r_max"):
            build_config(_raw(factors={"r": 9, "r_max": 8}))

    def test_short_horizon_trims_default_lists(self):
        config = build_config(_raw(analysis={"horizon": 8}))
        assert config.analysis.cumulative_horizons == [4]
        assert config.analysis.fevd_horizons == [1, 4, 8]

    def test_explicit_horizon_beyond_h(self):
        with pytest.raises(ConfigError, match="Cumulative horizons"):
            build_config(_raw(analysis={"horizon": 8, "cumulative_horizons": [12]}))

    def test_bad_sign(self):
        with pytest.raises(ConfigError, match="sign"):
            build_config(_raw(identify={"signs": {"GDP": "up"}}))

    def test_too_few_bootstrap_replications(self):
        with pytest.raises(ConfigError, match="bootstrap"):
            build_config(_raw(analysis={"bootstrap": 50}))

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="Extra inputs"):
            build_config(_raw(var={"lags": 2}))

    def test_federal_series_keys(self):
        with pytest.raises(ConfigError, match="PIT or CIT"):
            build_config(_raw(narrative={"federal_series": {"VAT": "X"}}))

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("FAVAR_WORKERS", "3")
        assert build_config(_raw()).run.workers == 3


class TestLoadConfig:
    def test_relative_paths_resolve_against_config(self, tmp_path):
        (tmp_path / "cfg").mkdir()
        path = tmp_path / "cfg" / "run.toml"
        path.write_text('[paths]\npanel = "data/panel.csv"\nevents = "/abs/events.csv"\n\n[run]\nseed = 1\n')
        config = load_config(path)
        assert config.paths.panel == tmp_path / "cfg" / "data" / "panel.csv"
        assert config.paths.events == Path("/abs/events.csv")
        assert config.paths.output_dir == Path("output")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[paths\npanel = 1\n")
        with pytest.raises(ConfigError, match="not valid TOML"):
            load_config(path)

    def test_missing_inputs(self, tmp_path):
        config = build_config(_raw(paths={"panel": str(tmp_path / "nope.csv")}))
        with pytest.raises(ConfigError, match="panel file not found"):
            config.require_inputs()

    def test_fixture_config_loads(self, fixture_files):
        config = load_config(fixture_files["config"])
        config.require_inputs()
        assert config.factors.r == 2
        assert config.paths.output_dir == fixture_files["config"].parent / "output"
