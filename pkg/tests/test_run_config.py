import math

import pytest

from core.exceptions import ConfigError
from core.run_config import EXPERIMENTS, RunConfig, config_from_dict, load_run_config


class TestDefaults:
    def test_derived_defaults(self):
        cfg = RunConfig()
        assert cfg.y_max == pytest.approx(10.0)
        assert cfg.epsilon == pytest.approx(0.1)
        assert cfg.n_modes == 8
        assert cfg.radius_tolerance == pytest.approx(0.05)

    def test_lambda_default_and_override(self):
        cfg = RunConfig()
        assert cfg.physics.lam == 10.0
        assert cfg.physics.delta / cfg.physics.lam == pytest.approx(0.05)
        assert config_from_dict({"physics": {"lambda": 100.0}}).physics.lam == 100.0
        assert cfg.physics.enforce_smallness is True

    def test_y_max_follows_theta_e(self):
        cfg = RunConfig()
        cfg.physics.theta_E = 4.0
        assert cfg.y_max == pytest.approx(20.0)

    def test_fingerprint_is_stable_and_sensitive(self):
        a, b = RunConfig(), RunConfig()
        assert a.fingerprint() == b.fingerprint()
        b.physics.seed = 8
        assert a.fingerprint() != b.fingerprint()
        assert len(a.fingerprint()) == 16

    def test_experiment_names(self):
        expected = {"run", "mms", "apriori", "radius", "uniqueness", "nu_limit", "lp_selftest"}
        assert set(EXPERIMENTS) == expected


class TestValidation:
    @pytest.mark.parametrize(
        "block, key, value",
        [
            ("grid", "N_x", 24),
            ("grid", "N_y", 8),
            ("grid", "fd_order", 6),
            ("physics", "epsilon", 1.5),
            ("physics", "lam", 0.0),
            ("physics", "initial", "random"),
            ("time", "dt_policy", "rk4"),
            ("time", "safety", 1.5),
            ("output", "norm_every", 0),
            ("experiment_params", "mms_levels", 1),
            ("experiment_params", "smallness_fractions", [0.5, 1.0]),
        ],
    )
    def test_rejects_bad_values(self, block, key, value):
        cfg = RunConfig()
        setattr(getattr(cfg, block), key, value)
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_large_epsilon_needs_smallness_switched_off(self):
        cfg = RunConfig()
        cfg.physics.epsilon = 2.0
        with pytest.raises(ConfigError):
            cfg.validate()
        cfg.physics.enforce_smallness = False
        assert cfg.validate() is cfg
        cfg.physics.epsilon = 0.0
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_unknown_experiment(self):
        cfg = RunConfig()
        cfg.experiment = "everything"
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_all_problems_reported_together(self):
        cfg = RunConfig()
        cfg.grid.N_y = 4
        cfg.time.dt = -1.0
        with pytest.raises(ConfigError) as info:
            cfg.validate()
        assert "N_y" in str(info.value) and "time.dt" in str(info.value)


class TestLoading:
    def test_dict_blocks_and_lambda_alias(self):
        cfg = config_from_dict({"physics": {"lambda": 4.0, "delta": 0.8}, "experiment": "radius"})
        assert cfg.physics.lam == 4.0
        assert cfg.experiment == "radius"

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"physics": {"gamma": 1.4}})
        with pytest.raises(ConfigError):
            config_from_dict({"solver": {}})

    def test_toml_file_with_experiment_table(self, tmp_path):
        path = tmp_path / "lab.toml"
        path.write_text(
            'experiment_name = "uniqueness"\n'
            "[grid]\nN_x = 16\nN_y = 64\n"
            "[physics]\nlambda = 5.0\n"
            "[experiment]\nsigma = 1e-4\nnus = [0.01, 0.005]\n"
        )
        cfg = load_run_config(path)
        assert cfg.experiment == "uniqueness"
        assert cfg.grid.N_x == 16
        assert cfg.physics.lam == 5.0
        assert cfg.experiment_params.sigma == 1e-4
        assert cfg.experiment_params.nus == [0.01, 0.005]

    def test_missing_or_broken_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.toml")
        broken = tmp_path / "broken.toml"
        broken.write_text("[grid\nN_x = ")
        with pytest.raises(ConfigError):
            load_run_config(broken)

    def test_no_file_means_defaults(self):
        cfg = load_run_config(None)
        assert cfg.grid.L_x == pytest.approx(2.0 * math.pi)
        assert cfg.experiment == "run"

    def test_as_dict_uses_file_names(self):
        data = RunConfig().as_dict()
        assert "lambda" in data["physics"] and "lam" not in data["physics"]
        assert "experiment_block" in data
