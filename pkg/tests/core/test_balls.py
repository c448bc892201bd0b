import numpy as np
import pytest

from src.core.balls import (
    BallParams,
    ball_membership,
    ball_membership_many,
    envelope,
    in_shrunk_envelope,
    isotropic_frame,
    make_ball,
    rasterize_envelope,
    sample_shrunk_envelope,
    shrunk_slice_measure,
    unit_ball,
    verify_quasiextremal,
)
from src.core.errors import BasisNotOrthonormal, DualityViolated, GridError, NotInShrunkSet, OffManifold
from src.core.grid import IncidencePoint, SpacePoint, solve_second_last

@pytest.fixture
def tilted_ball():
    x = np.array([0.2, -0.1, 0.4])
    y_prime = np.array([0.5, 0.3])
    y = np.append(y_prime, solve_second_last(x, y_prime))
    angle = 0.3
    basis = [[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]]
    return make_ball((x, y), basis, [0.5, 2.0], [1.0, 0.25])

class TestMakeBall:
    def test_rho_from_duality(self, tilted_ball):
        assert tilted_ball.rho == pytest.approx(0.5)

    def test_duality_violated(self):
        with pytest.raises(DualityViolated):
            make_ball((np.zeros(3), np.zeros(3)), np.eye(2), [1.0, 1.0], [1.0, 2.0])

    def test_basis_not_orthonormal(self):
        with pytest.raises(BasisNotOrthonormal):
            make_ball((np.zeros(3), np.zeros(3)), [[1.0, 0.0], [1.0, 1.0]], [1.0, 1.0], [1.0, 1.0])

    def test_off_manifold(self):
        with pytest.raises(OffManifold):
            make_ball(([0.0, 0.0], [0.0, 1.0]), [[1.0]], [1.0], [1.0])

    def test_json_round_trip(self, tilted_ball):
        restored = BallParams.from_json(tilted_ball.to_json())
        np.testing.assert_allclose(restored.basis, tilted_ball.basis)
        np.testing.assert_allclose(restored.dual_radii, tilted_ball.dual_radii)
        assert restored.rho == pytest.approx(tilted_ball.rho)

class TestEnvelope:
    def test_closed_form_measures(self, tilted_ball):
        pair = envelope(tilted_ball)
        assert pair.measure_first == pytest.approx(8 * 0.5 * 0.5 * 2.0)
        assert pair.measure_second == pytest.approx(8 * 0.5 * 1.0 * 0.25)

    @pytest.mark.parametrize("voxels", [32, 64])
    def test_raster_converges(self, voxels):
        pair = envelope(unit_ball(2))
        for factor, exact in (("first", pair.measure_first), ("second", pair.measure_second)):
            measured = rasterize_envelope(pair, factor, voxels).measure()
            assert abs(measured - exact) / exact <= 8 / voxels

    def test_center_belongs(self, tilted_ball):
        x, y = tilted_ball.center.as_arrays()
        assert ball_membership_many(tilted_ball, x[None, :], y[None, :])[0]
        pair = envelope(tilted_ball)
        assert pair.contains_first(x)[0] and pair.contains_second(y)[0]

class TestQuasiextremal:
    def test_unit_ball_matches_closed_form(self):
        # T(E, E★) = ∫∫ 2(1 - |st|) ds dt over [-1, 1]^2 = 6 and |E| = |E★| = 4
        s = verify_quasiextremal(unit_ball(2), voxels=32)
        assert s.epsilon == pytest.approx(6 / 4 ** (4 / 3), rel=0.02)

    def test_dilation_invariant_score(self):
        # a parabolically dilated unit ball rasterizes onto the same relative grid
        lam = 2.0
        dilated = make_ball((np.zeros(2), np.zeros(2)), [[1.0]], [lam], [lam])
        base = verify_quasiextremal(unit_ball(2), voxels=32).epsilon
        assert verify_quasiextremal(dilated, voxels=32).epsilon == pytest.approx(base, rel=0.02)

    def test_anisotropic_linear_map_keeps_score(self):
        zero = np.zeros(3)
        stretched = make_ball((zero, zero), np.eye(2), [4.0, 1.0], [0.25, 1.0])
        base = verify_quasiextremal(unit_ball(3), voxels=16)
        moved = verify_quasiextremal(stretched, voxels=16)
        assert moved.epsilon == pytest.approx(base.epsilon, rel=0.02)
        assert moved.measure_first == pytest.approx(4 * base.measure_first, rel=1e-9)
        assert moved.measure_second == pytest.approx(base.measure_second / 4, rel=1e-9)

    def test_isotropic_frame(self, tilted_ball):
        frame = isotropic_frame(tilted_ball)
        np.testing.assert_allclose(frame.radii, np.sqrt(0.5))
        np.testing.assert_allclose(frame.dual_radii, np.sqrt(0.5))
        np.testing.assert_allclose(frame.basis, tilted_ball.basis)
        assert frame.rho == pytest.approx(tilted_ball.rho)
        before, after = envelope(tilted_ball), envelope(frame)
        assert after.measure_first * after.measure_second == pytest.approx(
            before.measure_first * before.measure_second)

class TestShrunkSlice:
    def test_full_dual_box_at_center(self):
        b = unit_ball(2)
        assert shrunk_slice_measure(b, 0.25, [0.0, 0.0]) == pytest.approx(2.0)

    def test_full_dual_box_on_samples(self, tilted_ball):
        eps = 1 / 12
        exact = float(np.prod(2 * tilted_ball.dual_radii))
        for x in sample_shrunk_envelope(tilted_ball, eps, seed=4, n=20):
            assert in_shrunk_envelope(tilted_ball, eps, x)
            assert shrunk_slice_measure(tilted_ball, eps, x) == pytest.approx(exact, rel=1e-9)

    def test_outside_point(self):
        with pytest.raises(NotInShrunkSet):
            shrunk_slice_measure(unit_ball(2), 0.25, [0.0, 0.9])

    def test_eps_range(self):
        with pytest.raises(ValueError):
            shrunk_slice_measure(unit_ball(2), 1.5, [0.0, 0.0])

class TestMembership:
    def test_center_is_member(self, tilted_ball):
        assert ball_membership(tilted_ball, tilted_ball.center)

    def test_far_pair_is_not(self):
        # incident, but x' lies outside the unit radius
        z = IncidencePoint(SpacePoint([2.0, 0.0]), SpacePoint([0.0, -4.0]))
        assert z.is_incident()
        assert not ball_membership(unit_ball(2), z)

    def test_dimension_mismatch(self):
        z = IncidencePoint(SpacePoint([0.0, 0.0, 0.0]), SpacePoint([0.0, 0.0, 0.0]))
        with pytest.raises(GridError):
            ball_membership(unit_ball(2), z)
