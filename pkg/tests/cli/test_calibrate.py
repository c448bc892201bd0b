import json

import numpy as np
import pytest

from src.cli.calibrate import DERIVATIONS, FIXED_CONSTANTS, derive_constants, write_constants
from src.cli.config import DEFAULT_TOLERANCES, SUITE_CONSTANTS, ExperimentConfig, load_frozen_constants
from src.cli.generators import gen_paraboloid_cluster
from src.cli.suites import SuiteResult
from src.config.settings import FROZEN_CONSTANTS_PATH
from src.core.balls import unit_ball, verify_quasiextremal
from src.core.transform import QuadratureSpec, evaluate_T

class TestDerivations:
    def test_rwt_takes_headroom_over_max(self):
        result = SuiteResult("rwt", 2, [{"epsilon": 0.2}, {"epsilon": 0.4}, {"epsilon": None}])
        assert DERIVATIONS["rwt"](result, 2) == {"K_2": pytest.approx(0.44)}

    def test_prop15_takes_min(self):
        result = SuiteResult("prop15", 3, [{"epsilon": 0.3}, {"epsilon": 0.1}])
        assert DERIVATIONS["prop15"](result, 3) == {"c0_3": pytest.approx(0.1)}

    def test_lorentz_fits_power_law(self):
        eta = np.array([1.0, 0.5, 0.25, 0.125])
        rows = [{"flatness": e, "ratio": 2.0 * e ** 1.5} for e in eta]
        derived = DERIVATIONS["lorentz"](SuiteResult("lorentz", 2, rows), 2)
        assert derived["lorentz_gamma_2"] == pytest.approx(1.5)
        assert derived["lorentz_c_2"] == pytest.approx(2.2)

    def test_tower_without_builds_leaves_constant(self):
        result = SuiteResult("tower", 2, [{"built": False, "phi_ratio": None}])
        assert DERIVATIONS["tower"](result, 2) == {}

    def test_lambda0_band(self):
        result = SuiteResult("lambda0", 2, [{"ratio": 0.5}, {"ratio": 2.0}])
        assert DERIVATIONS["lambda0"](result, 2) == {
            "lambda0_low_2": pytest.approx(0.45),
            "lambda0_high_2": pytest.approx(2.2),
        }

    def test_lambda0_cluster_floor(self):
        rows = [
            {"ratio": 1.0, "family": "paraboloid_cluster", "min_T": 2.0},
            {"ratio": 1.0, "family": "paraboloid_cluster", "min_T": 1.5},
            {"ratio": 1.0, "family": "ball_envelope"},
        ]
        derived = DERIVATIONS["lambda0"](SuiteResult("lambda0", 2, rows), 2)
        assert derived["lambda0_cluster_floor_2"] == pytest.approx(1.35)

    def test_uncalibrated_suites_contribute_fixed_constants_only(self):
        assert derive_constants(ExperimentConfig(), ["convexify", "cover"]) == FIXED_CONSTANTS

class TestWriteConstants:
    def test_merges_and_sorts(self, tmp_path):
        path = tmp_path / "frozen.json"
        path.write_text(json.dumps({"constants": {"K_3": 3.0, "K_2": 1.0}}))
        write_constants({"K_2": 2.0, "c0_2": 0.1}, path)
        payload = json.loads(path.read_text())
        assert list(payload["constants"]) == ["K_2", "K_3", "c0_2"]
        assert load_frozen_constants(path) == {"K_2": 2.0, "K_3": 3.0, "c0_2": 0.1}

    def test_creates_missing_file(self, tmp_path):
        path = tmp_path / "nested" / "frozen.json"
        write_constants({"kappa1": 0.5}, path)
        assert load_frozen_constants(path) == {"kappa1": 0.5}

    def test_keeps_and_extends_provenance(self, tmp_path):
        path = tmp_path / "frozen.json"
        path.write_text(json.dumps({"constants": {"K_2": 1.0}, "provenance": {"d2": {"method": "calibrate"}}}))
        write_constants({"K_3": 2.0}, path, {"d3": {"method": "calibrate"}})
        payload = json.loads(path.read_text())
        assert sorted(payload["provenance"]) == ["d2", "d3"]
        assert load_frozen_constants(path) == {"K_2": 1.0, "K_3": 2.0}

class TestFrozenConstants:
    @pytest.fixture(scope="class")
    def frozen(self):
        return load_frozen_constants(FROZEN_CONSTANTS_PATH)

    @pytest.mark.parametrize("dim, voxels", [(2, 32), (3, 24)])
    def test_ball_constants_bracket_a_fresh_score(self, frozen, dim, voxels):
        epsilon = verify_quasiextremal(unit_ball(dim), voxels=voxels).epsilon
        c0, bound = frozen[f"c0_{dim}"], frozen[f"K_{dim}"]
        assert DEFAULT_TOLERANCES["prop15_headroom"] * c0 <= epsilon <= bound
        # a floor far below the measured score would make the prop15 check vacuous
        assert c0 >= 0.8 * epsilon

    def test_cluster_floor_below_a_fresh_cluster(self, frozen):
        E, Estar = gen_paraboloid_cluster(2, 0.05, seed=1)
        q = QuadratureSpec(t_resolution=float(Estar.spacing[0]))
        lowest = float(evaluate_T(Estar, E.occupied_centers(), q).min())
        assert frozen["lambda0_cluster_floor_2"] <= lowest <= 2 * frozen["lambda0_cluster_floor_2"]

    def test_every_suite_constant_is_frozen(self, frozen):
        for suite, templates in SUITE_CONSTANTS.items():
            for template in templates:
                for dim in (2, 3):
                    assert template.format(d=dim) in frozen, suite

    def test_provenance_is_recorded(self):
        payload = json.loads(FROZEN_CONSTANTS_PATH.read_text())
        assert "closed_form" in payload["provenance"]
