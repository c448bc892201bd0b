import json
import math

import numpy as np
import pytest

from src.cli.config import ExperimentConfig, load_frozen_constants
from src.cli.generators import gen_paraboloid_cluster
from src.cli.suites import (
    SUITES,
    SuiteResult,
    check_lambda0,
    cluster_row,
    convexify_cases,
    lambda0_metrics,
    lorentz_closed_form,
    measure,
    run_suite,
    shadow,
)
from src.config.settings import FROZEN_CONSTANTS_PATH
from src.core.errors import ConfigInvalid, UnknownSuite
from src.core.grid import GridGeometry, GridSet
from src.core.transform import QuadratureSpec
from src.utils.process_logger import SuiteLogger

@pytest.fixture
def config():
    return ExperimentConfig(
        frozen_constants=load_frozen_constants(FROZEN_CONSTANTS_PATH),
        corpus_sizes={"slicing": 3},
    )

class TestRegistry:
    def test_every_suite_is_registered(self):
        assert set(SUITES) == {
            "rwt", "prop15", "cover", "symmetry", "tower", "slicing",
            "convexify", "detmoment", "trilinear", "lorentz", "extract", "lambda0",
        }

    def test_unknown_suite(self, config):
        with pytest.raises(UnknownSuite):
            measure("nope", config)
        with pytest.raises(UnknownSuite):
            run_suite("nope", config)

    def test_missing_constants(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            run_suite("rwt", ExperimentConfig(), tmp_path)

class TestConvexifySuite:
    def test_cases(self):
        cases = convexify_cases()
        assert cases["interval"].measure() == pytest.approx(2.0)
        assert cases["gapped"].measure() == pytest.approx(1.0)
        assert cases["disk"].measure() == pytest.approx(math.pi, rel=0.02)

    def test_passes_and_writes_reports(self, config, tmp_path):
        assert run_suite("convexify", config, tmp_path) == 0
        payload = json.loads((tmp_path / "convexify_d2.json").read_text())
        assert payload["passed"] is True
        assert [row["case"] for row in payload["rows"]] == ["interval", "gapped", "disk"]

    def test_reports_are_reproducible(self, config, tmp_path):
        run_suite("convexify", config, tmp_path / "a")
        run_suite("convexify", config, tmp_path / "b")
        for name in ("convexify_d2.json", "convexify_d2.csv", "convexify_d2.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_failing_assertion_exits_one(self, config, tmp_path):
        strict = config.model_copy(update={"frozen_constants": {**config.frozen_constants, "convexify_c0": 10.0}})
        assert run_suite("convexify", strict, tmp_path) == 1

class TestSlicingSuite:
    def test_closed_forms(self, config):
        result = measure("slicing", config)
        assert result.metrics["unit"]["lhs"] == pytest.approx(0.5)
        assert result.metrics["unit"]["rhs"] == pytest.approx(0.5)
        assert result.metrics["doubled"]["ratio"] == pytest.approx(result.metrics["unit"]["ratio"])
        assert len(result.rows) == 3
        assert all(row["ratio"] > 0 for row in result.rows)

class TestHelpers:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_lorentz_closed_form_is_exact(self, dim):
        for case in lorentz_closed_form(dim):
            assert case["norm"] == pytest.approx(case["expected"], rel=1e-12)

    def test_shadow_box(self):
        G = GridSet.full(GridGeometry.from_voxels([0.0, 1.0], [0.5, 1.5], 4))
        low = shadow(G, 0.5)
        lower, upper = low.bounding_box()
        np.testing.assert_allclose(lower, [-0.5, 0.75])
        assert upper[0] >= 1.0 - 1e-9
        assert upper[1] >= 1.5 - 1e-9
        np.testing.assert_allclose(low.spacing, G.spacing)

@pytest.fixture(scope="module")
def cluster():
    E, Estar = gen_paraboloid_cluster(2, 0.05, seed=1)
    return E, Estar, QuadratureSpec(t_resolution=float(Estar.spacing[0]))

class TestLambda0Suite:
    @staticmethod
    def floor_step(config, rows):
        steps = SuiteLogger("lambda0")
        check_lambda0(SuiteResult("lambda0", 2, rows, lambda0_metrics(rows)), config, steps)
        return next(step for step in steps.steps if "cluster floor" in step["description"])

    def test_full_tubes_clear_the_floor(self, config, cluster):
        E, Estar, q = cluster
        row = cluster_row(2, 2, E, Estar, q)
        assert row["min_T"] >= config.constant("lambda0_cluster_floor_{d}")
        assert self.floor_step(config, [row])["passed"] is True

    def test_thinned_tubes_fail_the_floor(self, config, cluster):
        E, Estar, q = cluster
        # keep one column in four so every arc loses most of its length
        occupancy = Estar.occupancy.copy()
        occupancy[np.arange(occupancy.shape[0]) % 4 != 0] = False
        row = cluster_row(2, 2, E, GridSet(Estar.geometry, occupancy), q)
        step = self.floor_step(config, [row])
        assert step["passed"] is False
        assert step["findings"]["min"] < step["findings"]["floor"]
