import numpy as np
import pytest

from src.core.balls import rasterize_pair, relative_quadrature, unit_ball
from src.core.errors import NoIncidences
from src.core.extraction import extract_ball

@pytest.fixture(scope="module")
def pair():
    E, Estar = rasterize_pair(unit_ball(2), 24)
    return E, Estar, relative_quadrature(Estar)

@pytest.fixture(scope="module")
def extracted(pair):
    E, Estar, q = pair
    return extract_ball(E, Estar, q)

class TestExtractBall:
    def test_ball_is_valid(self, extracted):
        ball, _ = extracted
        assert ball.dim == 2
        assert ball.rho > 0
        np.testing.assert_allclose(ball.radii * ball.dual_radii, ball.rho)

    def test_report_ratios(self, extracted, pair):
        ball, report = extracted
        assert report.rho == pytest.approx(ball.rho)
        assert 0 < report.retention <= 1 + 1e-9
        assert report.first_measure_ratio > 0
        assert report.second_measure_ratio > 0
        assert report.slab_inflation >= 1.0
        assert report.omega1_measure > 0
        assert report.omega2_measure > 0
        assert report.convex_measure > 0

    def test_unit_ball_measures_are_comparable(self, extracted):
        _, report = extracted
        assert 1 / 8 <= report.first_measure_ratio <= 8
        assert 1 / 8 <= report.second_measure_ratio <= 8
        assert report.retention >= 0.5

    def test_rho_matches_the_convexified_steps(self, extracted):
        ball, report = extracted
        # 2 ∏ r★ = |𝒞| up to the common inflation λ
        assert 2 * ball.dual_radii[0] == pytest.approx(report.slab_inflation * report.convex_measure, rel=1e-6)

    def test_center_on_manifold(self, extracted):
        ball, _ = extracted
        assert ball.center.is_incident(1e-9)

    def test_no_incidences(self, pair):
        E, Estar, q = pair
        with pytest.raises(NoIncidences):
            extract_ball(E, Estar.translate([0.0, 100.0]), q)
