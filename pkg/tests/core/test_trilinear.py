import numpy as np
import pytest

from src.core.errors import EmptySet
from src.core.grid import GridGeometry, GridSet
from src.core.transform import QuadratureSpec, evaluate_T
from src.core.trilinear import comparable_measures_check, trilinear_check

@pytest.fixture
def q():
    return QuadratureSpec(t_resolution=1 / 64)

@pytest.fixture
def eprime():
    # [-1, 1) x [-1, 0)
    return GridSet.full(GridGeometry.from_voxels([-1.0, -1.0], [1.0, 0.0], (64, 32)))

@pytest.fixture
def G():
    # a thin box just above the origin, horizontal spacing 1/64
    return GridSet.full(GridGeometry.from_voxels([-0.0625, 0.0], [0.0625, 0.0625], (8, 4)))

@pytest.fixture
def E():
    return GridSet.full(GridGeometry.from_voxels([-1.0, 0.0], [1.0, 0.5], (32, 16)))

class TestTrilinearCheck:
    def test_superlevel_holds(self, E, eprime, G, q):
        floor = float(evaluate_T(eprime, G.occupied_centers(), q).min())
        report = trilinear_check(E, eprime, G, 0.9 * floor, q)
        assert report.hypothesis_ok
        assert report.witness is None
        assert report.incidence > 0
        assert report.rhs == pytest.approx(2.0)
        assert report.lhs == pytest.approx(report.incidence / E.measure() * (0.9 * floor) ** 2)
        assert report.ratio == pytest.approx(report.lhs / report.rhs)

    def test_adversarial_level_is_detected(self, E, eprime, G, q):
        floor = float(evaluate_T(eprime, G.occupied_centers(), q).min())
        report = trilinear_check(E, eprime, G, 2 * floor, q)
        assert not report.hypothesis_ok
        assert G.contains(np.asarray(report.witness))
        assert report.witness_value == pytest.approx(floor)

    def test_zero_level(self, E, eprime, G, q):
        report = trilinear_check(E, eprime, G, 0.0, q)
        assert report.lhs == 0.0
        assert report.hypothesis_ok

    def test_rejections(self, E, eprime, G, q):
        with pytest.raises(EmptySet):
            trilinear_check(E, eprime, GridSet.empty(G.geometry), 1.0, q)
        with pytest.raises(ValueError):
            trilinear_check(E, eprime, G, -1.0, q)

class TestComparableMeasures:
    def test_exponent(self, E, eprime):
        report = comparable_measures_check(E, eprime, 0.5)
        assert report.ratio == pytest.approx(2.0)
        assert report.exponent == pytest.approx(1.0)

    def test_smaller_set_has_zero_exponent(self, E, eprime):
        assert comparable_measures_check(eprime, E, 0.5).exponent == 0.0

    def test_eta_range(self, E, eprime):
        with pytest.raises(ValueError):
            comparable_measures_check(E, eprime, 1.0)
