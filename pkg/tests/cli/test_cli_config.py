import json

import pytest
from pydantic import ValidationError

from src.cli.config import DEFAULT_TOLERANCES, ExperimentConfig, load_config, load_frozen_constants
from src.core.errors import ConfigInvalid, UnknownSuite

@pytest.fixture
def config():
    return ExperimentConfig(seeds=[3, 5], frozen_constants={"K_2": 1.5})

class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.dimension == 2
        assert config.seed == 0
        assert config.tolerances == DEFAULT_TOLERANCES
        assert config.size("rwt") == 100

    def test_item_seed_cycles_through_seeds(self, config):
        assert config.item_seed(0) == 3 * 100_003
        assert config.item_seed(1, offset=2) == 5 * 100_003 + 7_919 + 2
        assert config.item_seed(2) == 3 * 100_003 + 2 * 7_919

    def test_partial_overrides_keep_defaults(self):
        config = ExperimentConfig(tolerances={"epsilon_cv": 0.3}, corpus_sizes={"rwt": 5})
        assert config.tolerance("epsilon_cv") == 0.3
        assert config.tolerance("slice_exact") == DEFAULT_TOLERANCES["slice_exact"]
        assert config.size("rwt") == 5
        assert config.size("tower") == 20

    def test_constant_lookup(self, config):
        assert config.constant("K_{d}") == 1.5
        with pytest.raises(ConfigInvalid):
            config.constant("c0_{d}")

    def test_require_constants(self, config):
        config.require_constants("rwt")
        config.require_constants("symmetry")
        with pytest.raises(ConfigInvalid, match="c0_2"):
            config.require_constants("prop15")
        with pytest.raises(UnknownSuite):
            config.require_constants("nope")

    @pytest.mark.parametrize("payload", [
        {"dimension": 4},
        {"seeds": []},
        {"seeds": [-1]},
        {"tolerances": {"epsilon_cv": 0.0}},
        {"corpus_sizes": {"rwt": 0}},
        {"quadrature": {"t_resolution": -1.0}},
    ])
    def test_invalid(self, payload):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(payload)

class TestLoading:
    def test_default_file(self):
        config = load_config()
        assert config.dimension == 2
        assert [g.family for g in config.generators] == ["voxel_union", "boxes", "ball_envelope", "transformed_envelope"]
        assert "K_2" in config.frozen_constants

    def test_dimension_override_and_constant_precedence(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"dimension": 2, "frozen_constants": {"K_3": 9.0}}))
        config = load_config(path, dimension=3)
        assert config.dimension == 3
        assert config.constant("K_{d}") == 9.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config(tmp_path / "absent.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigInvalid):
            load_config(path)

    def test_invalid_content(self, tmp_path):
        path = tmp_path / "invalid.json"
        path.write_text(json.dumps({"dimension": 5}))
        with pytest.raises(ConfigInvalid):
            load_config(path)

    def test_frozen_constants_forms(self, tmp_path):
        wrapped = tmp_path / "wrapped.json"
        wrapped.write_text(json.dumps({"constants": {"K_2": 2}}))
        plain = tmp_path / "plain.json"
        plain.write_text(json.dumps({"K_2": 2}))
        assert load_frozen_constants(wrapped) == {"K_2": 2.0}
        assert load_frozen_constants(plain) == {"K_2": 2.0}
        assert load_frozen_constants(tmp_path / "absent.json") == {}
