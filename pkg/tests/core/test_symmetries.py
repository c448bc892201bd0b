import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.balls import make_ball, unit_ball
from src.core.errors import GridError, MisalignedLinearAction, NonInvertible, OffManifold
from src.core.grid import GridGeometry, GridSet, IncidencePoint, SpacePoint, incidence_residual
from src.core.symmetries import (
    GENERATOR_KINDS,
    SymmetryElement,
    apply_ball,
    apply_pair,
    apply_points,
    check_invariance,
    compose,
    conjugated_residual,
    inverse,
    normalizing_element,
    random_generator,
    random_word,
    sample_manifold,
    transform_set,
)
from src.utils.rng import stream

@pytest.fixture
def ball():
    x = np.array([0.5, 1.0])
    y = np.array([1.5, 0.0])
    return make_ball((x, y), [[1.0]], [0.5], [2.0])

kinds = st.sampled_from(GENERATOR_KINDS)
seeds = st.integers(min_value=0, max_value=2 ** 20)
dims = st.sampled_from([2, 3])

class TestGenerators:
    @given(kind=kinds, seed=seeds, dim=dims)
    @settings(max_examples=40, deadline=None)
    def test_preserves_manifold(self, kind, seed, dim):
        g = SymmetryElement((random_generator(kind, dim, stream(seed)),), dim)
        X, Y = sample_manifold(dim, 200, seed, box=2.0)
        X2, Y2 = apply_points(g, X, Y)
        scale = np.maximum(1.0, np.abs(X2[:, -1]))
        assert np.all(np.abs(incidence_residual(X2, Y2)) <= 1e-9 * scale)

    @given(seed=seeds, dim=dims)
    @settings(max_examples=25, deadline=None)
    def test_inverse_undoes_word(self, seed, dim):
        g = random_word(dim, 4, seed)
        X, Y = sample_manifold(dim, 50, seed, box=1.0)
        back = compose(inverse(g), g)
        X2, Y2 = apply_points(back, X, Y)
        np.testing.assert_allclose(X2, X, atol=1e-8)
        np.testing.assert_allclose(Y2, Y, atol=1e-8)

    def test_dilation_factors(self):
        g = SymmetryElement.parabolic_dilation(2.0, 3)
        assert g.measure_factors() == (16.0, 16.0)

    def test_invariance_report(self):
        g = SymmetryElement.sheared_linear([[2.0, 0.5], [0.0, 1.0]])
        report = check_invariance(g, 1000, seed=2)
        assert report.scaling_ok
        assert report.declared_first == pytest.approx(2.0)
        assert report.declared_second == pytest.approx(0.5)
        assert report.max_residual <= 1e-9

    def test_rejects_bad_parameters(self):
        with pytest.raises(NonInvertible):
            SymmetryElement.parabolic_dilation(0.0, 2)
        with pytest.raises(GridError):
            SymmetryElement.single("reflection", [1.0], 2)

    def test_conjugated_residual_vanishes(self):
        X, Y = sample_manifold(3, 100, seed=9)
        assert np.max(np.abs(conjugated_residual(X, Y))) < 1e-9

    def test_word_json_round_trip(self):
        g = random_word(3, 5, seed=17)
        restored = SymmetryElement.from_json(g.to_json(), 3)
        X, Y = sample_manifold(3, 20, seed=1)
        np.testing.assert_allclose(restored.map_first(X), g.map_first(X))
        np.testing.assert_allclose(restored.map_second(Y), g.map_second(Y))

class TestBalls:
    def test_normalizing_element(self, ball):
        normalized = apply_ball(normalizing_element(ball), ball)
        np.testing.assert_allclose(normalized.center_x, 0.0, atol=1e-9)
        np.testing.assert_allclose(normalized.center_xstar, 0.0, atol=1e-9)
        np.testing.assert_allclose(normalized.radii, 1.0)
        np.testing.assert_allclose(normalized.dual_radii, 1.0)

    def test_dilation_scales_rho(self, ball):
        dilated = apply_ball(SymmetryElement.parabolic_dilation(3.0, 2), ball)
        assert dilated.rho == pytest.approx(9 * ball.rho)

    def test_misaligned_linear_map(self):
        b = unit_ball(3)
        with pytest.raises(MisalignedLinearAction):
            apply_ball(SymmetryElement.sheared_linear([[1.0, 0.5], [0.0, 1.0]]), b)

    def test_aligned_linear_map(self):
        b = unit_ball(3)
        moved = apply_ball(SymmetryElement.sheared_linear(np.diag([2.0, 0.5])), b)
        np.testing.assert_allclose(sorted(moved.radii), [0.5, 2.0])
        assert moved.rho == pytest.approx(1.0)

class TestTransformSet:
    def test_translation_keeps_measure(self):
        S = GridSet.from_predicate(
            GridGeometry.from_voxels([-1.0, -1.0], [1.0, 1.0], 32),
            lambda p: np.sum(p * p, axis=1) < 0.5,
        )
        moved = transform_set(S, SymmetryElement.translation([0.25, -0.5]), "first")
        assert moved.measure() == pytest.approx(S.measure(), rel=0.1)
        assert moved.contains([0.25, -0.5])

class TestApplyPair:
    def test_translation_moves_both_factors(self):
        z = IncidencePoint(SpacePoint([0.0, 0.0]), SpacePoint([1.0, -1.0]))
        moved = apply_pair(SymmetryElement.translation([1.0, 2.0]), z)
        np.testing.assert_allclose(moved.first.coords, [1.0, 2.0])
        np.testing.assert_allclose(moved.second.coords, [2.0, 1.0])
        assert moved.is_incident(1e-9)

    def test_rejects_off_manifold_input(self):
        z = IncidencePoint(SpacePoint([0.0, 0.0]), SpacePoint([1.0, 0.0]))
        with pytest.raises(OffManifold):
            apply_pair(SymmetryElement.shear([0.5]), z)
