"""
Config loading and validation
Run with: pytest tests/test_config.py -v
"""

import pytest
from pathlib import Path
import sys

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from markov_embedding.config import STARTER_CONFIG, AppConfig, ModelSection, load_config
from markov_embedding.models import FiniteEnvConfig, JcConfig, SpinBosonConfig
from markov_embedding.validators import (
    parse_complex,
    validate_complex,
    validate_config_basic,
    validate_int_at_least,
    validate_model_params,
    validate_positive,
    validate_probability,
)


class TestValidators:
    def test_validate_positive(self):
        assert validate_positive(0.2, "tau")[0]
        assert validate_positive("1e-3", "tau")[0]
        ok, msg = validate_positive(0, "tau")
        assert not ok and "positive" in msg
        assert not validate_positive("abc", "tau")[0]
        assert not validate_positive(True, "tau")[0]

    def test_validate_int_at_least(self):
        assert validate_int_at_least(3, "d_E", 2)[0]
        assert not validate_int_at_least(1, "d_E", 2)[0]
        assert not validate_int_at_least(2.0, "d_E", 2)[0]

    def test_validate_probability(self):
        assert validate_probability(1.0, "floor")[0]
        assert not validate_probability(0.0, "floor")[0]
        assert not validate_probability(1.5, "floor")[0]

    def test_model_params(self):
        assert validate_model_params("finite", {"d_E": 3, "tau": 0.2}) == []
        assert any("required" in e for e in validate_model_params("finite", {}))
        assert validate_model_params("jc", {"gamma": 0.05, "g": 2.5}) == []
        assert any("one of" in e for e in validate_model_params("qutrit", {}))

    def test_parse_complex(self):
        assert parse_complex("1.1,0.3") == complex(1.1, 0.3)
        assert parse_complex(" 1.1 , -0.3 ") == complex(1.1, -0.3)
        assert parse_complex("1.1+0.3j") == complex(1.1, 0.3)
        assert parse_complex("2") == complex(2.0, 0.0)
        for bad in ("abc", "1,2,3", "1,x"):
            with pytest.raises(ValueError):
                parse_complex(bad)

    def test_validate_complex(self):
        assert validate_complex(1.1, "alpha")[0]
        assert validate_complex([1.1, 0.3], "alpha")[0]
        assert validate_complex("1.1+0.3j", "alpha")[0]
        assert not validate_complex([1.1], "alpha")[0]
        assert not validate_complex("one", "alpha")[0]

    def test_new_model_params(self):
        assert validate_model_params("finite", {"d_E": 2, "rate_norm": "per-element"}) == []
        assert any("rate_norm" in e for e in validate_model_params("finite", {"d_E": 2, "rate_norm": "max"}))
        assert any("alpha" in e for e in validate_model_params("jc", {"alpha": "big"}))
        params = {"check_convergence": True, "convergence_tol": 1e-4}
        assert validate_model_params("spin-boson", params) == []
        assert len(validate_model_params("spin-boson", {"check_convergence": "yes", "convergence_tol": 0})) == 2

    def test_spin_boson_must_be_underdamped(self):
        assert validate_model_params("spin-boson", {"gamma": 0.4}) == []
        errors = validate_model_params("spin-boson", {"gamma": 3.0, "omega0": 1.0})
        assert any("underdamped" in e for e in errors)

    def test_config_basic_valid(self):
        config = {
            "model": {"kind": "finite", "d_E": 2},
            "dataset": {"L": 4, "T": 100, "sigma": "1e-3"},
            "fit": {"K": 10, "floor": 1e-12, "variant": "literal"},
            "sweep": {"seeds": [0, 1], "workers": 2},
            "logging": {"level": "debug"},
        }
        assert validate_config_basic(config) == []

    def test_config_basic_errors(self):
        config = {
            "dataset": {"L": 0, "T": 1},
            "fit": {"K": 0, "variant": "exact"},
            "sweep": {"seeds": [], "workers": 0},
            "logging": {"level": "LOUD"},
        }
        errors = validate_config_basic(config)
        assert len(errors) == 7
        assert validate_config_basic([1, 2]) == ["config root must be a YAML mapping"]


class TestModelSection:
    def test_finite_defaults_to_seed(self):
        cfg = ModelSection(kind="finite", params={"d_E": 4}).to_model_config(seed=11)
        assert cfg == FiniteEnvConfig(d_E=4, generator_seed=11)

    def test_overrides_win(self):
        section = ModelSection(kind="jc", params={"alpha": [1.0, 0.5], "gamma": 0.1})
        cfg = section.to_model_config(overrides={"gamma": 0.2, "g": None})
        assert isinstance(cfg, JcConfig)
        assert cfg.gamma == 0.2
        assert cfg.g == 2.5
        assert cfg.alpha == complex(1.0, 0.5)

    def test_spin_boson(self):
        cfg = ModelSection(kind="spin-boson", params={"gamma": 0.2}).to_model_config()
        assert cfg == SpinBosonConfig(gamma=0.2)

    def test_new_model_fields(self):
        finite = ModelSection(kind="finite", params={"d_E": 2, "rate_norm": "per-element"}).to_model_config()
        assert finite.rate_norm == "per-element"
        assert ModelSection(kind="finite", params={"d_E": 2}).to_model_config().rate_norm == "total"
        jc = ModelSection(kind="jc", params={"alpha": "1.1+0.3j"}).to_model_config()
        assert jc.alpha == complex(1.1, 0.3)
        sb = ModelSection(
            kind="spin-boson", params={"check_convergence": True, "convergence_tol": 1e-4}
        ).to_model_config()
        assert sb.check_convergence
        assert sb.convergence_tol == pytest.approx(1e-4)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ModelSection(kind="qutrit").to_model_config()


class TestLoadConfig:
    def test_starter_config(self, tmp_path):
        path = tmp_path / "embedding.config.yml"
        path.write_text(STARTER_CONFIG, encoding="utf-8")
        cfg = load_config(path)
        assert isinstance(cfg, AppConfig)
        assert cfg.model.kind == "finite"
        assert cfg.model.params["d_E"] == 3
        assert cfg.dataset.sigma == pytest.approx(1e-3)
        assert cfg.fit.K == 75
        assert cfg.fit.sigma is None
        assert cfg.fit.floor == pytest.approx(1e-12)
        assert cfg.sweep.seeds == [0, 1, 2, 3, 4]
        assert cfg.logging.level == "INFO"

    def test_threshold_falls_back_to_dataset_sigma(self, tmp_path):
        path = tmp_path / "c.yml"
        path.write_text("fit:\n  K: 5\n", encoding="utf-8")
        cfg = load_config(path)
        assert cfg.fit.threshold(0.01).sigma == 0.01
        path.write_text("fit:\n  sigma: 1e-3\n", encoding="utf-8")
        assert load_config(path).fit.threshold(0.01).sigma == pytest.approx(1e-3)

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yml"
        path.write_text("", encoding="utf-8")
        cfg = load_config(path)
        assert cfg.dataset.L == 4
        assert cfg.fit.variant == "projected"

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.yml"
        path.write_text("fit:\n  K: -1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="Invalid config"):
            load_config(path)
        # validation can be skipped
        path.write_text("fit:\n  variant: exact\n", encoding="utf-8")
        assert load_config(path, validate=False).fit.variant == "exact"

    def test_root_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_config(path)
