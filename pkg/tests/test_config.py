import json
import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from src.config import (
    ExperimentConfig, GridSpec, SimulateBlock, get_settings, load_experiment_config,
)
from src.core.errors import ConfigError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"

LAW = {"A": {"type": "lognormal", "mu": -1.0, "sigma": math.sqrt(2.0)}, "B": {"type": "const", "value": 1.0}}


def _write(tmp_path, data, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestSettings:
    def test_defaults(self, monkeypatch):
        for key in ("PERPWATCH_THREADS", "PERPWATCH_BATCH_SIZE", "PERPWATCH_LOG_LEVEL"):
            monkeypatch.delenv(key, raising=False)
        settings = get_settings()
        assert settings.threads == 0
        assert settings.batch_size == 8192
        assert settings.effective_threads >= 1

    def test_env_prefix(self, monkeypatch):
        monkeypatch.setenv("PERPWATCH_THREADS", "3")
        monkeypatch.setenv("PERPWATCH_LOG_LEVEL", "DEBUG")
        settings = get_settings()
        assert settings.effective_threads == 3
        assert settings.log_level == "DEBUG"


class TestExperimentConfig:
    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_configs_load(self, path):
        assert isinstance(load_experiment_config(path), ExperimentConfig)

    def test_scale_strings(self, tmp_path):
        cfg = load_experiment_config(_write(tmp_path, {
            "law": LAW,
            "simulate": {"target": "pointwise", "rho": 2.0, "u": "e^8", "seed": 1},
        }))
        assert cfg.simulate.u == pytest.approx(math.exp(8.0))
        assert cfg.simulate.samples == 100_000

    def test_grid_values(self):
        grid = GridSpec(lo="e^8", hi="exp(20)", points=10)
        values = grid.values()
        assert len(values) == 10
        assert values[0] == pytest.approx(math.exp(8.0))
        assert values[-1] == pytest.approx(math.exp(20.0))
        with pytest.raises(ValidationError):
            GridSpec(lo=10.0, hi=1e6, points=5)
        with pytest.raises(ValidationError):
            GridSpec(lo=1e6, hi=10.0, points=6)

    def test_unknown_key(self, tmp_path):
        path = _write(tmp_path, {"law": LAW, "analyze": {"rho": 2.0, "tolerance": 1e-3}})
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment_config(tmp_path / "absent.json")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"law": [1, 2', encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment_config(path)

    def test_require(self, tmp_path):
        cfg = load_experiment_config(_write(tmp_path, {"law": LAW, "analyze": {"rho": 2.0}}))
        assert cfg.require("analyze").rho == 2.0
        with pytest.raises(ConfigError):
            cfg.require("verify")

    def test_law_required_except_oracle(self, tmp_path):
        cfg = load_experiment_config(_write(tmp_path, {
            "analyze": {"rho": 2.0},
            "oracle": {"a_atoms": [[0.5, 0.75], [2.0, 0.25]], "b_atoms": [[1.0, 1.0]], "n_max": 4, "u": 2.9},
        }))
        assert cfg.require("oracle").n_max == 4
        with pytest.raises(ConfigError):
            cfg.require("analyze")

    def test_simulate_requirements(self):
        with pytest.raises(ValidationError):
            SimulateBlock(target="pointwise", u=10.0)
        with pytest.raises(ValidationError):
            SimulateBlock(target="ruin", horizon_factor=4)
        with pytest.raises(ValidationError):
            SimulateBlock(target="ruin", u=10.0, horizon_factor=1)
        with pytest.raises(ValidationError):
            SimulateBlock(target="constant")
        assert SimulateBlock(target="constant", alpha=1.5).L == 30

    def test_verify_method_default(self, tmp_path):
        base = {"u_grid": {"lo": "e^6", "hi": "e^14", "points": 8}, "rho": 0.5}
        thm2 = load_experiment_config(_write(tmp_path, {"law": LAW, "verify": {"regime": "thm2", **base}}))
        assert thm2.verify.resolved_method == "twophase"
        thm1 = load_experiment_config(_write(tmp_path, {"law": LAW, "verify": {"regime": "thm1", **base}}))
        assert thm1.verify.resolved_method == "tilted"
