import numpy as np
import pytest

from src.core.errors import HypothesisViolated, NonInvertible, RasterOverflow
from src.core.grid import GridGeometry, GridSet
from src.core.slicing import RasterSpec, image_measure, slicing_bound

@pytest.fixture
def unit_domain():
    # s in [0, 1), u in [0, 1)
    return GridSet.full(GridGeometry.from_voxels([0.0, 0.0], [1.0, 1.0], 16))

@pytest.fixture
def half_domain():
    # s in [0, 0.5), u in [-1, 1)
    return GridSet.full(GridGeometry.from_voxels([0.0, -1.0], [0.5, 1.0], (8, 32)))

class TestImageMeasure:
    def test_single_cell(self):
        # s in [0, 1) at u = 0.5 sweeps an interval of length 0.5
        assert image_measure(np.array([[0.5]]), np.array([[0.5]]), 1.0, 0.25) == pytest.approx(0.125)

    def test_overlapping_boxes_are_not_double_counted(self):
        S = np.array([[0.5], [0.5]])
        U = np.array([[0.5], [0.5]])
        assert image_measure(S, U, 1.0, 0.25) == pytest.approx(0.125)

    def test_empty(self):
        assert image_measure(np.zeros((0, 1)), np.zeros((0, 1)), 1.0, 1.0) == 0.0

class TestSlicingBound:
    def test_unit_domain_is_exact(self, unit_domain):
        report = slicing_bound(unit_domain, np.eye(1))
        assert report.lhs == pytest.approx(0.5)
        assert report.rhs == pytest.approx(0.5)
        assert report.ratio == pytest.approx(1.0)

    def test_symmetric_u_range(self, half_domain):
        report = slicing_bound(half_domain, np.eye(1))
        assert report.lhs == pytest.approx(0.5)
        assert report.rhs == pytest.approx(0.5)

    def test_scaling_A_scales_rhs(self, unit_domain):
        # |det A|^{-1} |A u| is invariant for A = a I when m = 1
        report = slicing_bound(unit_domain, 2.0 * np.eye(1))
        assert report.rhs == pytest.approx(0.5)

    def test_two_dimensional_slices(self):
        # s in [0, 0.5)^2, u in [0, 1)^2: each u-cell sweeps [0, (u1 + u2) / 2]
        omega = GridSet.full(GridGeometry.from_voxels([0.0, 0.0, 0.0, 0.0], [0.5, 0.5, 1.0, 1.0], 4))
        report = slicing_bound(omega, 2.0 * np.eye(2))
        assert report.lhs == pytest.approx(0.5)
        assert report.ratio > 1.0

    def test_raster_tracks_exact_union(self, unit_domain):
        exact = slicing_bound(unit_domain, np.eye(1)).lhs
        rastered = slicing_bound(unit_domain, np.eye(1), RasterSpec(v_resolution=1 / 64, bound=2.0)).lhs
        assert abs(rastered - exact) <= 1 / 32

    def test_raster_overflow(self, unit_domain):
        with pytest.raises(RasterOverflow):
            slicing_bound(unit_domain, np.eye(1), RasterSpec(v_resolution=1 / 64, bound=0.5))

    def test_s_outside_image_of_unit_ball(self, unit_domain):
        with pytest.raises(HypothesisViolated):
            slicing_bound(unit_domain, 0.5 * np.eye(1))

    def test_singular_A(self, unit_domain):
        with pytest.raises(NonInvertible):
            slicing_bound(unit_domain, np.zeros((1, 1)))

    def test_shape_checks(self, unit_domain):
        with pytest.raises(ValueError):
            slicing_bound(unit_domain, np.eye(2))
        odd = GridSet.full(GridGeometry.from_voxels([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 2))
        with pytest.raises(ValueError):
            slicing_bound(odd, np.eye(1))

    def test_asymmetric_A(self):
        omega = GridSet.full(GridGeometry.from_voxels([0.0] * 4, [0.25] * 4, 2))
        with pytest.raises(ValueError):
            slicing_bound(omega, np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_empty_domain(self, unit_domain):
        report = slicing_bound(GridSet.empty(unit_domain.geometry), np.eye(1))
        assert report.lhs == 0.0
        assert report.ratio is None
