import json

import pytest

from sparkxd.config import ConfigError, ExperimentConfig


class TestValidation:
    def test_defaults_from_empty(self):
        cfg = ExperimentConfig.from_dict({})
        assert cfg.voltages == (1.325, 1.250, 1.175, 1.100, 1.025)
        assert cfg.network_sizes == (100,)
        assert cfg.schedule.rates == (1e-5, 1e-4, 1e-3, 1e-2)

    def test_undervoltage_rejected(self):
        with pytest.raises(ConfigError) as e:
            ExperimentConfig.from_dict({"voltages": [0.9]})
        assert "0.9" in str(e.value)

    def test_collects_multiple_violations(self):
        with pytest.raises(ConfigError) as e:
            ExperimentConfig.from_dict(
                {"voltages": [0.9, 2.0], "network_sizes": [0], "error_model": "M7"}
            )
        msg = str(e.value)
        assert "0.9" in msg and "2.0" in msg
        assert "network_sizes" in msg
        assert "error_model" in msg

    def test_capacity_check(self):
        with pytest.raises(ConfigError) as e:
            ExperimentConfig.from_dict(
                {
                    "geometry": {"n_ch": 1, "n_ra": 1, "n_cp": 1, "n_ba": 1,
                                 "n_su": 1, "n_ro": 1, "n_co": 4},
                    "network_sizes": [100],
                }
            )
        assert "capacity" in str(e.value)

    def test_schedule_must_increase(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"schedule": [1e-3, 1e-4]})

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(tmp_path / "nope.json")

    def test_bad_json_is_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(path)


class TestHash:
    def test_stable_across_loads(self, tmp_path):
        doc = {"voltages": [1.325, 1.025], "network_sizes": [4],
               "snn": {"n_in": 16, "n_exc": 4}}
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        a = ExperimentConfig.from_json(path).hash()
        b = ExperimentConfig.from_json(path).hash()
        assert a == b

    def test_differs_on_content(self):
        a = ExperimentConfig.from_dict({"voltages": [1.325]}).hash()
        b = ExperimentConfig.from_dict({"voltages": [1.025]}).hash()
        assert a != b


class TestAccessors:
    def test_snn_for_size(self):
        cfg = ExperimentConfig.from_dict({"snn": {"n_in": 64}})
        p = cfg.snn_for_size(25)
        assert p.n_exc == 25
        assert p.n_in == 64

    def test_ber_profile_from_config(self):
        cfg = ExperimentConfig.from_dict(
            {"ber_profile": [[1.35, 0.0], [1.0249999, 5e-5]], "voltages": [1.1]}
        )
        assert cfg.ber_profile.ber_at(1.35) == 0.0
