import json
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core import grid as grid_module
from src.core.errors import EmptySet, GridError
from src.core.grid import (
    GridFunction,
    GridGeometry,
    GridSet,
    IncidencePoint,
    SpacePoint,
    incidence_residual,
    solve_second_last,
)

@pytest.fixture
def square():
    return GridGeometry.from_voxels([0.0, 0.0], [1.0, 1.0], 4)

@pytest.fixture
def lower_half(square):
    return GridSet.from_predicate(square, lambda p: p[:, 1] < 0.5)

@pytest.fixture
def grid_log(capsys):
    handler = grid_module.logger.logger.handlers[0]
    previous = handler.setStream(sys.stdout)
    yield capsys
    handler.setStream(previous)

masks = st.lists(st.booleans(), min_size=16, max_size=16).map(lambda bits: np.array(bits).reshape(4, 4))

class TestGeometry:
    def test_from_voxels_spacing(self, square):
        assert square.shape == (4, 4)
        np.testing.assert_allclose(square.spacing, [0.25, 0.25])
        assert square.voxel_volume == pytest.approx(1 / 16)

    def test_from_bounds_reaches_upper(self):
        g = GridGeometry.from_bounds([0.0, 0.0], [1.0, 0.3], 0.25)
        assert g.shape == (4, 2)
        assert np.all(g.upper >= [1.0, 0.3])

    def test_rejects_bad_axes(self):
        with pytest.raises(GridError):
            GridGeometry([0.0, 0.0], [0.1, -0.1], (2, 2))
        with pytest.raises(GridError):
            GridGeometry.from_voxels([0.0, 1.0], [1.0, 1.0], 4)

    def test_lookup_is_half_open(self, square, lower_half):
        values = square.lookup(lower_half.occupancy, np.array([[0.1, 0.49], [0.1, 0.5], [1.0, 0.1]]), fill=False)
        assert values.tolist() == [True, False, False]

class TestGridSet:
    def test_measure(self, lower_half):
        assert lower_half.count == 8
        assert lower_half.measure() == pytest.approx(0.5)

    def test_bounding_box_uses_faces(self, lower_half):
        lower, upper = lower_half.bounding_box()
        np.testing.assert_allclose(lower, [0.0, 0.0])
        np.testing.assert_allclose(upper, [1.0, 0.5])

    def test_empty_has_no_box(self, square):
        assert GridSet.empty(square).bounding_box() is None

    def test_sampling_stays_inside(self, lower_half):
        points = lower_half.sample_uniform(seed=3, n=500)
        assert lower_half.contains_many(points).all()

    def test_sampling_empty_set_fails(self, square):
        with pytest.raises(EmptySet):
            GridSet.empty(square).sample_uniform(0, 10)

    def test_restrict(self, lower_half):
        left = lower_half.restrict(lambda p: p[:, 0] < 0.5)
        assert left.count == 4

    def test_mismatched_grids(self, lower_half):
        other = GridSet.full(GridGeometry.from_voxels([0.0, 0.0], [1.0, 1.0], 8))
        with pytest.raises(GridError):
            lower_half.union(other)

    def test_translate_keeps_measure(self, lower_half):
        moved = lower_half.translate([2.0, -1.0])
        assert moved.measure() == lower_half.measure()
        assert moved.contains([2.1, -0.9])

    def test_json_round_trip(self, lower_half):
        restored = GridSet.from_json(lower_half.to_json())
        assert restored.geometry.same_as(lower_half.geometry)
        assert np.array_equal(restored.occupancy, lower_half.occupancy)

    def test_bad_run_lengths(self, lower_half):
        payload = json.loads(lower_half.to_json())
        payload["occupancy_rle"] = [1, 2]
        with pytest.raises(GridError):
            GridSet.from_dict(payload)

    def test_rejected_payloads_are_logged(self, lower_half, grid_log):
        payload = json.loads(lower_half.to_json())
        payload["occupancy_rle"] = [1, 2]
        with pytest.raises(GridError):
            GridSet.from_dict(payload)
        del payload["occupancy_rle"]
        with pytest.raises(GridError):
            GridSet.from_dict(payload)
        out = grid_log.readouterr().out
        assert "Rejected GridSet payload" in out
        assert "missing field" in out

    @given(a=masks, b=masks)
    @settings(max_examples=50, deadline=None)
    def test_inclusion_exclusion(self, a, b):
        g = GridGeometry.from_voxels([0.0, 0.0], [1.0, 1.0], 4)
        A, B = GridSet(g, a), GridSet(g, b)
        total = A.union(B).measure() + A.intersection(B).measure()
        assert total == pytest.approx(A.measure() + B.measure())

class TestGridFunction:
    def test_rejects_negative_values(self, square):
        with pytest.raises(GridError):
            GridFunction(square, -np.ones(square.shape))

    def test_level_set_and_mass(self, square):
        values = np.zeros(square.shape)
        values[0] = 2.0
        f = GridFunction(square, values)
        assert f.level_set(2.0, 4.0).count == 4
        assert f.lp_mass(2) == pytest.approx(4.0 * 4 / 16)

    def test_json_round_trip(self, square, lower_half):
        f = lower_half.indicator(3.0)
        restored = GridFunction.from_json(f.to_json())
        assert np.array_equal(restored.values, f.values)

    def test_wrong_value_count_is_logged(self, square, grid_log):
        payload = GridFunction.zeros(square).to_dict()
        payload["values"] = payload["values"][:-1]
        with pytest.raises(GridError):
            GridFunction.from_dict(payload)
        assert "Rejected GridFunction payload" in grid_log.readouterr().out

class TestIncidence:
    def test_solved_points_are_incident(self):
        x = np.array([0.3, -0.2, 1.5])
        y_prime = np.array([1.0, 0.5])
        y = np.append(y_prime, solve_second_last(x, y_prime))
        assert abs(incidence_residual(x, y)) < 1e-14
        assert IncidencePoint(SpacePoint(x), SpacePoint(y)).is_incident()

    def test_points_need_two_coordinates(self):
        with pytest.raises(GridError):
            SpacePoint([1.0])
