import math
import sys

import numpy as np
import pytest

from src.cli import generators as generators_module
from src.cli.config import GeneratorSpec
from src.cli.generators import (
    cluster_reference_measures,
    corpus_seeds,
    dilute,
    flat_pair,
    gen_paraboloid_cluster,
    gen_random_sets,
    random_ball,
    random_slicing_domain,
)
from src.core.balls import rasterize_pair, relative_quadrature, unit_ball
from src.core.errors import SeparationFailed
from src.core.lorentz import flatness, flatness_gain
from src.core.slicing import slicing_bound
from src.core.transform import bilinear
from src.utils.rng import stream

FAMILIES = ["voxel_union", "boxes", "ball_envelope", "transformed_envelope"]

class TestParaboloidCluster:
    def test_reference_measures(self):
        balls, tubes = cluster_reference_measures(4, 0.01, 2)
        assert balls == pytest.approx(4 * math.pi * 1e-4)
        assert tubes == pytest.approx(4 * 4 * 0.01 * (math.sqrt(5) + math.asinh(2) / 2))

    def test_ball_measure_tracks_reference(self):
        E, Estar = gen_paraboloid_cluster(4, 0.05, seed=1)
        balls, _ = cluster_reference_measures(4, 0.05, 2)
        assert 0.5 * balls <= E.measure() <= 2 * balls
        assert Estar.measure() > E.measure()

    def test_deterministic(self):
        first = gen_paraboloid_cluster(4, 0.05, seed=2)[0]
        second = gen_paraboloid_cluster(4, 0.05, seed=2)[0]
        np.testing.assert_array_equal(first.occupancy, second.occupancy)

    def test_separation_failure(self):
        with pytest.raises(SeparationFailed):
            gen_paraboloid_cluster(50, 0.5, seed=0)

    def test_resampling_reports_attempt_numbers(self, capsys):
        handler = generators_module.logger.logger.handlers[0]
        previous = handler.setStream(sys.stdout)
        try:
            with pytest.raises(SeparationFailed, match="after 5 draws"):
                gen_paraboloid_cluster(50, 0.5, seed=0)
        finally:
            handler.setStream(previous)
        out = capsys.readouterr().out
        for attempt in range(1, 5):
            assert f"attempt {attempt} of 5" in out
        assert "attempt 5 of 5" not in out

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            gen_paraboloid_cluster(0, 0.05, seed=0)

class TestRandomSets:
    def test_random_ball_range(self):
        b = random_ball(3, stream(4), (0.5, 2.0))
        assert np.all((b.radii >= 0.5) & (b.radii <= 2.0))
        assert b.center.is_incident(1e-9)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_families_are_reproducible(self, family):
        spec = GeneratorSpec(family=family)
        E, Estar = gen_random_sets(spec, seed=11, voxels=16)
        again = gen_random_sets(spec, seed=11, voxels=16)
        np.testing.assert_array_equal(E.occupancy, again[0].occupancy)
        np.testing.assert_array_equal(Estar.occupancy, again[1].occupancy)

    @pytest.mark.parametrize("family", ["voxel_union", "boxes", "ball_envelope"])
    def test_families_are_nonempty(self, family):
        E, Estar = gen_random_sets(GeneratorSpec(family=family), seed=11, voxels=16)
        assert E.count > 0 and Estar.count > 0

    def test_corpus_seeds(self):
        specs = [GeneratorSpec(family="boxes", count=2), GeneratorSpec(family="voxel_union", count=1)]
        items = corpus_seeds(specs, base_seed=1)
        assert [spec.family for spec, _ in items] == ["boxes", "boxes", "voxel_union"]
        assert [seed for _, seed in items] == [100_003, 100_003 + 7_919, 100_003 + 2 * 7_919]
        assert len(corpus_seeds(specs, 1, limit=2)) == 2

class TestDilute:
    def test_doubles_measure_without_new_incidences(self):
        E, Estar = rasterize_pair(unit_ball(2), 24)
        q = relative_quadrature(Estar)
        E2, Estar2 = dilute(E, Estar, 2.0)
        assert E2.count == 2 * E.count
        assert Estar2.count == 2 * Estar.count
        assert bilinear(E2, Estar2, q) == pytest.approx(bilinear(E, Estar, q), rel=0.02)

    def test_factor_one_is_identity(self):
        E, Estar = rasterize_pair(unit_ball(2), 16)
        E2, Estar2 = dilute(E, Estar, 1.0)
        assert E2.count == E.count and Estar2.count == Estar.count

    def test_rejects_shrinking(self):
        E, Estar = rasterize_pair(unit_ball(2), 16)
        with pytest.raises(ValueError):
            dilute(E, Estar, 0.5)

class TestFlatPair:
    def test_levels_flatten_fstar(self):
        b = unit_ball(2)
        sweep = [flatness(flat_pair(b, levels, 24)[1]) for levels in (0, 2, 4)]
        assert sweep[0] == pytest.approx(1.0)
        assert sweep[1] < sweep[0]
        assert sweep[2] < sweep[1]

    def test_top_level_value(self):
        f, fstar = flat_pair(unit_ball(2), 3, 24)
        assert fstar.values.max() == 8.0
        assert set(np.unique(f.values)) <= {0.0, 1.0}

    def test_gain_nonincreasing_as_levels_flatten(self):
        b = unit_ball(2)
        ratios = []
        for levels in range(4):
            f, fstar = flat_pair(b, levels, 24)
            eta = min(1.0, flatness(fstar))
            ratios.append(flatness_gain(f, fstar, eta, relative_quadrature(f.support())).ratio)
        assert ratios[0] > 0
        for before, after in zip(ratios, ratios[1:]):
            assert after <= before * 1.05

class TestSlicingDomain:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_domain_satisfies_hypothesis(self, dim):
        omega, A = random_slicing_domain(dim, stream(8), voxels=8)
        np.testing.assert_allclose(A, A.T)
        eigenvalues = np.linalg.eigvalsh(A)
        assert np.all((eigenvalues >= 0.5 - 1e-12) & (eigenvalues <= 2.0 + 1e-12))
        assert slicing_bound(omega, A).lhs > 0
