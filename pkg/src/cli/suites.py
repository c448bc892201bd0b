"""Suites Module

Acceptance suites. Each suite has a measurement pass, which computes one row
per corpus item or sweep point plus summary metrics, and a check pass, which
compares the metrics against the frozen constants and tolerances of the
configuration. `calibrate` reuses the measurement passes to derive the
frozen constants.
"""

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.stats import linregress

from .config import SUITE_NAMES, ExperimentConfig, GeneratorSpec
from .generators import (
    corpus_seeds,
    dilute,
    flat_pair,
    gen_paraboloid_cluster,
    gen_random_sets,
    random_ball,
    random_slicing_domain,
)
from .reports import write_suite_reports
from ..config.report_formats import SUITE_SUMMARY
from ..config.settings import RUNTIME_SETTINGS
from ..core.balls import (
    envelope,
    rasterize_envelope,
    rasterize_pair,
    sample_shrunk_envelope,
    shrunk_slice_measure,
    unit_ball,
    verify_quasiextremal,
    default_voxels,
)
from ..core.convexify import ConvexApprox, Slab, convexify, verify_exclusion
from ..core.covering import cover, cover_exponent, coverage_fraction
from ..core.det_moment import det_moment, hypothesis_mass
from ..core.errors import ExtractionFailed, TowerFailed, UnknownSuite
from ..core.extraction import extract_ball
from ..core.grid import GridFunction, GridGeometry, GridSet
from ..core.lorentz import LorentzSpec, flatness, flatness_gain, lorentz_norm
from ..core.slicing import RasterSpec, image_measure, slicing_bound
from ..core.symmetries import (
    GENERATOR_KINDS,
    SymmetryElement,
    apply_ball,
    check_invariance,
    random_generator,
    random_word,
)
from ..core.tower import build_tower, check_inclusions, phi_image_measure, tower_summary
from ..core.transform import QuadratureSpec, bilinear, evaluate_T, lambda0_reference, score
from ..core.trilinear import comparable_measures_check, trilinear_check
from ..utils.async_utils import map_bounded
from ..utils.logger import Logger
from ..utils.process_logger import SuiteLogger
from ..utils.rng import stream

logger = Logger(__name__)

# Ball draws for the expensive suites stay within a factor 2 of the unit ball
MODERATE_RADII = (0.5, 2.0)

INVARIANCE_SAMPLES = 10_000
COVER_SAMPLES = 10_000
COVER_DELTAS = tuple(2.0 ** -k for k in range(1, 7))
INCLUSION_SAMPLES = 1_000
SLICE_BALLS = 10
SLICE_POINTS = 100
DET_SAMPLES = 20_000
DET_ORACLE_SAMPLES = 1_000_000
LORENTZ_LEVELS = 6
DILUTION_STEPS = 5
CLUSTER_SIZES = {2: (4, 8, 16, 32), 3: (2, 4, 8, 16)}
CLUSTER_DELTA = {2: 0.01, 3: 0.05}

DEFAULT_FAMILIES = [
    GeneratorSpec(family="voxel_union", count=25),
    GeneratorSpec(family="boxes", count=25),
    GeneratorSpec(family="ball_envelope", count=25),
    GeneratorSpec(family="transformed_envelope", count=25),
]


@dataclass
class SuiteResult:
    suite: str
    dimension: int
    rows: List[Dict[str, Any]] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)


def _pool(func: Callable, items) -> List[Any]:
    return map_bounded(func, list(items), RUNTIME_SETTINGS["max_workers"], RUNTIME_SETTINGS["suite_timeout"])


def _finest(*sets: GridSet) -> float:
    return min(float(np.min(S.spacing[:-1])) for S in sets)


def _quadrature(config: ExperimentConfig, *sets: GridSet, relative: bool = False) -> QuadratureSpec:
    """
    The configured quadrature, refined to the finest horizontal spacing of
    the sets it will be evaluated on. Relative quadratures use that spacing
    outright, which keeps ball suites scale free.
    """
    finest = _finest(*sets)
    if relative or config.quadrature.t_resolution > finest:
        return config.quadrature.with_resolution(finest)
    return config.quadrature


def _draw_ball(config: ExperimentConfig, index: int, radius_range=MODERATE_RADII, offset: int = 0):
    return random_ball(config.dimension, stream(config.item_seed(index, offset)), radius_range)


def _ratio(a: float, b: float) -> Optional[float]:
    return a / b if b > 0 else None


# ---------------------------------------------------------------- rwt

def measure_rwt(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension
    items = corpus_seeds(config.generators or DEFAULT_FAMILIES, config.seed, config.size("rwt"))

    def run(item):
        spec, seed = item
        E, Estar = gen_random_sets(spec, seed, d, config.voxels)
        s = score(E, Estar, _quadrature(config, Estar))
        return {
            "dim": d,
            "family": spec.family,
            "seed": seed,
            "measure_first": s.measure_first,
            "measure_second": s.measure_second,
            "incidence": s.incidence,
            "epsilon": s.epsilon,
        }

    rows = _pool(run, items)
    return SuiteResult("rwt", d, rows, {"max_epsilon": max(r["epsilon"] for r in rows)})


def check_rwt(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    bound = config.constant("K_{d}")
    worst = result.metrics["max_epsilon"]
    steps.add_step(
        f"epsilon stays below K_{result.dimension} over {len(result.rows)} pairs",
        {"max_epsilon": worst, "K": bound},
        passed=worst <= bound,
    )


# ---------------------------------------------------------------- prop15

def _envelope_convergence(d: int, base: int) -> Dict[str, Any]:
    """Rasterized unit-ball envelope measures against 2^d ρ ∏ r at three resolutions"""
    pair = envelope(unit_ball(d))
    resolutions = [base, 2 * base, 4 * base]
    errors = []
    for voxels in resolutions:
        first = rasterize_envelope(pair, "first", voxels).measure()
        second = rasterize_envelope(pair, "second", voxels).measure()
        errors.append(max(
            abs(first - pair.measure_first) / pair.measure_first,
            abs(second - pair.measure_second) / pair.measure_second,
        ))
    order = None
    if all(e > 0 for e in errors):
        order = float(-linregress(np.log(resolutions), np.log(errors)).slope)
    return {"voxels": resolutions, "relative_errors": errors, "order": order}


def _slice_deviation(config: ExperimentConfig) -> float:
    """Largest relative gap between the shrunk slice measure and ∏ 2 r★ over sampled x"""
    d = config.dimension
    eps = 1 / (4 * d)

    def run(i):
        b = _draw_ball(config, i, (1 / 8, 8), offset=1)
        exact = float(np.prod(2 * b.dual_radii))
        points = sample_shrunk_envelope(b, eps, config.item_seed(i, 2), SLICE_POINTS)
        measured = np.array([shrunk_slice_measure(b, eps, x) for x in points])
        return float(np.max(np.abs(measured - exact)) / exact)

    return max(_pool(run, range(SLICE_BALLS)))


def measure_prop15(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension

    def run(i):
        b = _draw_ball(config, i, (1 / 8, 8))
        s = verify_quasiextremal(b, voxels=config.voxels)
        return {"dim": d, "draw": i, "rho": b.rho, "epsilon": s.epsilon, "alpha": s.alpha, "alpha_star": s.alpha_star}

    rows = _pool(run, range(config.size("prop15")))
    epsilon = np.array([r["epsilon"] for r in rows])
    metrics = {
        "min_epsilon": float(epsilon.min()),
        "max_epsilon": float(epsilon.max()),
        "cv": float(epsilon.std() / epsilon.mean()),
        "envelope": _envelope_convergence(d, config.voxels or default_voxels(d)),
        "slice_deviation": _slice_deviation(config),
    }
    return SuiteResult("prop15", d, rows, metrics)


def check_prop15(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    m = result.metrics
    floor = config.tolerance("prop15_headroom") * config.constant("c0_{d}")
    steps.add_step("every ball pair is quasiextremal", {"min_epsilon": m["min_epsilon"], "floor": floor},
                   passed=m["min_epsilon"] >= floor)
    steps.add_step("epsilon is uniform across ball draws", {"cv": m["cv"]},
                   passed=m["cv"] <= config.tolerance("epsilon_cv"))
    envelope_ok = all(
        e <= config.tolerance("envelope_error") / v
        for v, e in zip(m["envelope"]["voxels"], m["envelope"]["relative_errors"])
    )
    steps.add_step("rasterized envelopes converge to the closed form", m["envelope"], passed=envelope_ok)
    steps.add_step("shrunk slices carry the full dual box", {"deviation": m["slice_deviation"]},
                   passed=m["slice_deviation"] <= config.tolerance("slice_exact"))


# ---------------------------------------------------------------- cover

def measure_cover(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension
    b = _draw_ball(config, 0)

    def run(delta):
        c = cover(b, delta)
        return {
            "dim": d,
            "delta": delta,
            "count": len(c),
            "coverage": coverage_fraction(c, config.seed, COVER_SAMPLES),
            "eta": c.eta,
        }

    rows = _pool(run, COVER_DELTAS)
    coarse = cover_exponent(b, COVER_DELTAS[:3])
    fine = cover_exponent(b, COVER_DELTAS[3:])
    metrics = {
        "min_coverage": min(r["coverage"] for r in rows),
        "coarse_exponent": coarse.exponent,
        "fine_exponent": fine.exponent,
    }
    return SuiteResult("cover", d, rows, metrics)


def check_cover(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    target = config.constant("cover_coverage")
    for row in result.rows:
        steps.add_step(f"sub-balls cover the ball at delta={row['delta']:g}",
                       {"coverage": row["coverage"], "count": row["count"]},
                       passed=row["coverage"] >= target)
    m = result.metrics
    gap = abs(m["coarse_exponent"] - m["fine_exponent"])
    steps.add_step("covering exponent is stable across delta ranges",
                   {"coarse": m["coarse_exponent"], "fine": m["fine_exponent"]},
                   passed=math.isfinite(gap) and gap <= config.tolerance("cover_exponent_gap"))


# ---------------------------------------------------------------- symmetry

def _element_for(kind: str, b, rng: np.random.Generator) -> SymmetryElement:
    """A random element of one kind; linear maps are diagonal in the ball's frame"""
    d = b.dim
    if kind == "sheared_linear":
        sigma = np.exp(rng.uniform(-0.5, 0.5, d - 1))
        return SymmetryElement.sheared_linear(b.basis.T @ np.diag(sigma) @ b.basis)
    return SymmetryElement((random_generator(kind, d, rng),), d)


def measure_symmetry(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension
    rng = stream(config.seed)
    invariance = {}
    for kind in GENERATOR_KINDS:
        g = SymmetryElement((random_generator(kind, d, rng),), d)
        invariance[kind] = check_invariance(g, INVARIANCE_SAMPLES, config.seed).model_dump()

    def run(i):
        b = _draw_ball(config, i)
        before = verify_quasiextremal(b, voxels=config.voxels).epsilon
        kinds = stream(config.item_seed(i, 1))
        rows = []
        for kind in GENERATOR_KINDS:
            moved = apply_ball(_element_for(kind, b, kinds), b)
            after = verify_quasiextremal(moved, voxels=config.voxels).epsilon
            rows.append({
                "dim": d,
                "kind": kind,
                "residual": invariance[kind]["max_residual"],
                "epsilon_before": before,
                "epsilon_after": after,
                "relative_change": abs(after - before) / before,
            })
        return rows

    rows = [row for batch in _pool(run, range(config.size("symmetry"))) for row in batch]
    return SuiteResult("symmetry", d, rows, {"invariance": invariance})


def check_symmetry(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    for kind in GENERATOR_KINDS:
        report = result.metrics["invariance"][kind]
        steps.add_step(f"{kind} preserves the incidence manifold",
                       {"max_residual": report["max_residual"]},
                       passed=report["max_residual"] <= config.tolerance("symmetry_residual"))
        steps.add_step(f"{kind} scales measures as declared",
                       {"first": report["jacobian_first"], "second": report["jacobian_second"]},
                       passed=report["scaling_ok"])
        changes = [r["relative_change"] for r in result.rows if r["kind"] == kind]
        steps.add_step(f"epsilon is invariant under {kind}", {"max_change": max(changes)},
                       passed=max(changes) <= config.tolerance("symmetry_epsilon"))


# ---------------------------------------------------------------- tower

def _raster_convergence(tower) -> float:
    """Relative change of the rasterized Φ image when the v-resolution halves"""
    S, T = tower.pairs()
    if S.shape[0] == 0:
        return 0.0
    U = T - S
    h = tower.omega1.geometry.spacing
    dv = float(h[0] * np.mean(np.abs(U)) / 4) or float(h[0])
    bound = 4 * float(np.max(np.abs(S) + h) * np.max(np.abs(U) + h) * S.shape[1] + np.max(np.abs(U) + h))
    coarse = image_measure(S, U, h, h, RasterSpec(v_resolution=dv, bound=bound))
    fine = image_measure(S, U, h, h, RasterSpec(v_resolution=dv / 2, bound=bound))
    return abs(fine - coarse) / fine if fine > 0 else 0.0


def measure_tower(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension

    def run(i):
        b = _draw_ball(config, i)
        E, Estar = rasterize_pair(b, config.voxels)
        row = {"dim": d, "draw": i, "built": False, "omega1_over_alpha": None,
               "fiber_over_alpha_star": None, "phi_ratio": None, "inclusions_ok": False}
        try:
            tower = build_tower(E, Estar, _quadrature(config, E, Estar, relative=True))
        except TowerFailed as e:
            logger.warning(f"Tower draw {i} failed: {e.message}")
            return row, None
        summary = tower_summary(tower)
        phi = phi_image_measure(tower, e_measure=E.measure())
        row.update(
            built=True,
            omega1_over_alpha=summary["omega1_over_alpha"],
            fiber_over_alpha_star=summary["fiber_over_alpha_star"],
            phi_ratio=phi.ratio,
            inclusions_ok=all(check_inclusions(tower, E, Estar, config.item_seed(i, 1), INCLUSION_SAMPLES)),
            first_measure_ratio=phi.first_measure_ratio,
        )
        return row, _raster_convergence(tower) if i == 0 else None

    outcomes = _pool(run, range(config.size("tower")))
    rows = [row for row, _ in outcomes]
    built = [r for r in rows if r["built"]]
    metrics = {
        "built": len(built),
        "min_omega1_over_alpha": min((r["omega1_over_alpha"] for r in built), default=None),
        "min_fiber_over_alpha_star": min((r["fiber_over_alpha_star"] for r in built), default=None),
        "min_phi_ratio": min((r["phi_ratio"] for r in built), default=None),
        "raster_change": outcomes[0][1],
    }
    return SuiteResult("tower", d, rows, metrics)


def check_tower(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    m = result.metrics
    steps.add_step("towers build on every ball-derived pair", {"built": m["built"], "draws": len(result.rows)},
                   passed=m["built"] == len(result.rows))
    if not m["built"]:
        return
    steps.add_step("|Ω₁| >= κ₁ α", {"min": m["min_omega1_over_alpha"]},
                   passed=m["min_omega1_over_alpha"] >= config.constant("kappa1") * (1 - 1e-9))
    steps.add_step("every fiber >= κ₂ α★", {"min": m["min_fiber_over_alpha_star"]},
                   passed=m["min_fiber_over_alpha_star"] >= config.constant("kappa2") * (1 - 1e-9))
    steps.add_step("sampled chains satisfy both memberships", {},
                   passed=all(r["inclusions_ok"] for r in result.rows if r["built"]))
    floor = config.tolerance("phi_headroom") * config.constant("kappa3_{d}")
    steps.add_step("Φ image stays above κ₃ α★^{d/(d-1)} α^{1/(d-1)}", {"min": m["min_phi_ratio"], "floor": floor},
                   passed=m["min_phi_ratio"] >= floor)
    if m["raster_change"] is not None:
        steps.add_step("Φ raster is converged", {"relative_change": m["raster_change"]},
                       passed=m["raster_change"] <= config.tolerance("raster_convergence"))


# ---------------------------------------------------------------- slicing

def _box_domain(s_range: Tuple[float, float], u_range: Tuple[float, float], voxels: int = 64) -> GridSet:
    geometry = GridGeometry.from_voxels([s_range[0], u_range[0]], [s_range[1], u_range[1]], voxels)
    return GridSet.full(geometry)


def measure_slicing(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension
    unit = slicing_bound(_box_domain((0, 1), (0, 1)), np.eye(1))
    doubled = slicing_bound(_box_domain((0, 2), (0, 0.5)), 2 * np.eye(1))

    def run(i):
        omega, A = random_slicing_domain(d, stream(config.item_seed(i)))
        report = slicing_bound(omega, A)
        return {"dim": d, "draw": i, "lhs": report.lhs, "rhs": report.rhs, "ratio": report.ratio}

    rows = _pool(run, range(config.size("slicing")))
    metrics = {
        "unit": unit.model_dump(),
        "doubled": doubled.model_dump(),
        "min_ratio": min(r["ratio"] for r in rows),
    }
    return SuiteResult("slicing", d, rows, metrics)


def check_slicing(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    m = result.metrics
    tolerance = config.tolerance("slicing_closed_form")
    unit = m["unit"]
    steps.add_step("ω = [0,1]², A = I gives (1/2, 1/2)", unit,
                   passed=abs(unit["lhs"] - 0.5) <= tolerance * 0.5 and abs(unit["rhs"] - 0.5) <= tolerance * 0.5)
    steps.add_step("doubling A leaves the ratio unchanged", m["doubled"],
                   passed=abs(m["doubled"]["ratio"] - unit["ratio"]) <= config.tolerance("slicing_transform") * unit["ratio"])
    bound = config.constant("slicing_c_{d}")
    steps.add_step("lhs >= c rhs on random domains", {"min_ratio": m["min_ratio"], "c": bound},
                   passed=m["min_ratio"] >= bound)


# ---------------------------------------------------------------- convexify

def _line(lower: float, upper: float, voxels: int) -> GridGeometry:
    return GridGeometry.from_voxels([lower], [upper], voxels)


def convexify_cases() -> Dict[str, GridSet]:
    """The interval, the gapped pair of intervals and the rasterized disk"""
    interval = GridSet.full(_line(-1, 1, 64))
    gapped = GridSet.from_predicate(_line(-9, 9, 72), lambda p: (np.abs(p[:, 0]) >= 8) & (np.abs(p[:, 0]) <= 8.5))
    disk_grid = GridGeometry.from_voxels([-1.25, -1.25], [1.25, 1.25], 64)
    disk = GridSet.from_predicate(disk_grid, lambda p: np.sum(p * p, axis=1) < 1)
    return {"interval": interval, "gapped": gapped, "disk": disk}


def measure_convexify(config: ExperimentConfig) -> SuiteResult:
    rows = []
    for case, S in convexify_cases().items():
        approx = convexify(S, eta=0.5)
        verified = verify_exclusion(S, approx)[0] if S.dim == 1 else None
        rows.append({
            "case": case,
            "measure_set": S.measure(),
            "measure_convex": approx.measure,
            "exclusion_constant": approx.exclusion_constant,
            "steps": approx.steps,
            "verified": verified,
        })
    return SuiteResult("convexify", config.dimension, rows, {})


def check_convexify(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    c0 = config.constant("convexify_c0")
    rows = {r["case"]: r for r in result.rows}
    interval = rows["interval"]
    steps.add_step("interval: |𝒞| <= 4|S| and exclusion >= c₀/2", interval,
                   passed=interval["measure_convex"] <= 4 * interval["measure_set"]
                   and interval["exclusion_constant"] >= c0 / 2)
    gapped = rows["gapped"]
    steps.add_step("gapped pair: |𝒞| >= |S|", gapped, passed=gapped["measure_convex"] >= gapped["measure_set"])
    for case in ("interval", "gapped"):
        steps.add_step(f"{case}: exclusion holds against every symmetric interval", {},
                       passed=bool(rows[case]["verified"]))
    disk = rows["disk"]
    steps.add_step("disk: |𝒞| <= 4|S|", disk, passed=disk["measure_convex"] <= 4 * disk["measure_set"])


# ---------------------------------------------------------------- detmoment

def _square(half: float, n: int) -> ConvexApprox:
    slabs = [Slab(direction=list(np.eye(n)[k]), half_width=half) for k in range(n)]
    return ConvexApprox(center_offset=[0.0] * n, slabs=slabs, measure=(2 * half) ** n, exclusion_constant=0.0)


def _voxel_measure(S: GridSet) -> Tuple[np.ndarray, np.ndarray]:
    points = S.occupied_centers()
    return points, np.full(points.shape[0], S.geometry.voxel_volume)


def _det_oracle(n: int, half: float, seed: int, samples: int) -> Tuple[float, float]:
    """E|det| over continuous uniform n-tuples of the cube [-half, half]^n, times its mass^n"""
    rng = stream(seed + 1, 1_000)
    values = np.abs(np.linalg.det(rng.uniform(-half, half, (samples, n, n))))
    mass = (2 * half) ** n
    return float(values.mean() * mass ** n), float(values.std(ddof=1) * mass ** n / math.sqrt(samples))


def measure_detmoment(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension
    delta = 0.5
    constant = config.frozen_constants.get("det_moment_c")
    rows = []

    def record(case, n, report, normalizer):
        rows.append({
            "case": case, "dim": n, "estimate": report.estimate, "stderr": report.stderr,
            "bound": report.bound, "normalized": report.estimate / normalizer if normalizer > 0 else None,
            "ok": report.ok, "hypothesis_ok": report.hypothesis_ok,
        })

    # Lebesgue measure on [-1, 1]: ∫|u| dμ = 1
    line = GridSet.full(_line(-1, 1, 1024))
    points, weights = _voxel_measure(line)
    lebesgue = det_moment(points, weights, _square(1.0, 1), delta, 0.0, config.seed, DET_ORACLE_SAMPLES, constant)
    record("lebesgue_line", 1, lebesgue, 0.0)

    # uniform on the centered unit square against a continuous oracle
    square = GridSet.full(GridGeometry.from_voxels([-0.5, -0.5], [0.5, 0.5], 64))
    points, weights = _voxel_measure(square)
    uniform = det_moment(points, weights, _square(0.5, 2), delta, 0.0, config.seed, DET_ORACLE_SAMPLES, constant)
    record("uniform_square", 2, uniform, 0.0)
    oracle = _det_oracle(2, 0.5, config.seed, DET_ORACLE_SAMPLES)

    # mass on a thin slab cannot satisfy the hypothesis at λ = 1/2
    slab = GridSet.from_predicate(square.geometry, lambda p: np.abs(p[:, 1]) < 0.05)
    points, weights = _voxel_measure(slab)
    thin = det_moment(points, weights, _square(0.5, 2), delta, 0.5, config.seed, DET_SAMPLES, constant)
    record("thin_slab", 2, thin, 0.0)

    def run(i):
        n = 1 + i % 2
        seed = config.item_seed(i)
        rng = stream(seed)
        geometry = GridGeometry.from_voxels(np.full(n, -1.0), np.full(n, 1.0), 64 if n == 1 else 32)
        occupancy = np.zeros(geometry.shape, dtype=bool)
        for _ in range(3):
            sides = np.maximum(1, (np.asarray(geometry.shape) * rng.uniform(0.2, 0.6, n)).astype(int))
            start = rng.integers(0, np.asarray(geometry.shape) - sides + 1)
            occupancy[tuple(slice(s, s + k) for s, k in zip(start, sides))] = True
        S = GridSet(geometry, occupancy)
        approx = convexify(S, eta=0.5)
        points, weights = _voxel_measure(S)
        inside = approx.contains(points)
        points, weights = points[inside], weights[inside]
        lam = hypothesis_mass(points, weights, approx, delta, seed)
        report = det_moment(points, weights, approx, delta, lam * (1 - 1e-9), seed, DET_SAMPLES, constant)
        normalizer = delta ** n * lam ** n * approx.measure
        return {
            "case": f"random_{i}", "dim": n, "estimate": report.estimate, "stderr": report.stderr,
            "bound": report.bound, "normalized": report.estimate / normalizer if normalizer > 0 else None,
            "ok": report.ok, "hypothesis_ok": report.hypothesis_ok,
        }

    rows.extend(_pool(run, range(config.size("detmoment"))))
    normalized = [r["normalized"] for r in rows if r["case"].startswith("random_") and r["normalized"] is not None]
    metrics = {
        "lebesgue": {"estimate": lebesgue.estimate, "stderr": lebesgue.stderr},
        "square": {"estimate": uniform.estimate, "stderr": uniform.stderr,
                   "oracle": oracle[0], "oracle_stderr": oracle[1]},
        "thin_slab_detected": not thin.hypothesis_ok,
        "min_normalized": min(normalized) if normalized else None,
    }
    return SuiteResult("detmoment", d, rows, metrics)


def check_detmoment(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    m = result.metrics
    sigma = config.tolerance("det_moment_sigma")
    lebesgue = m["lebesgue"]
    steps.add_step("∫|u| over Lebesgue on [-1,1] equals 1", lebesgue,
                   passed=abs(lebesgue["estimate"] - 1.0) <= sigma * lebesgue["stderr"])
    square = m["square"]
    combined = math.hypot(square["stderr"], square["oracle_stderr"])
    steps.add_step("unit square estimate matches the continuous oracle", square,
                   passed=abs(square["estimate"] - square["oracle"]) <= sigma * combined)
    steps.add_step("thin slab violates the mass hypothesis", {}, passed=m["thin_slab_detected"])
    random_rows = [r for r in result.rows if r["case"].startswith("random_")]
    steps.add_step("estimate >= c δ^n λ^n |𝒞| on every draw", {"min_normalized": m["min_normalized"]},
                   passed=all(r["ok"] for r in random_rows))


# ---------------------------------------------------------------- trilinear

def shadow(G: GridSet, reach: float) -> GridSet:
    """Full box below G from which every point of G sees a reach-ball of steps"""
    lower, upper = G.bounding_box()
    low = np.append(lower[:-1] - reach, lower[-1] - reach * reach)
    high = np.append(upper[:-1] + reach, upper[-1])
    return GridSet.full(GridGeometry.from_bounds(low, high, G.spacing))


def measure_trilinear(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension

    def run(i):
        b = _draw_ball(config, i)
        E, G = rasterize_pair(b, config.voxels)
        Eprime = shadow(G, float(np.max(b.dual_radii)))
        q = _quadrature(config, G, Eprime, relative=True)
        beta = float(evaluate_T(Eprime, G.occupied_centers(), q).min()) * (1 - 1e-9)
        report = trilinear_check(E, Eprime, G, beta, q)
        adversarial = trilinear_check(E, Eprime, G, 2 * beta, q)
        comparable = comparable_measures_check(E, Eprime, 0.5)
        return {
            "dim": d, "draw": i, "lhs": report.lhs, "rhs": report.rhs, "ratio": report.ratio,
            "hypothesis_ok": report.hypothesis_ok,
            "adversarial_detected": not adversarial.hypothesis_ok,
            "comparable_exponent": comparable.exponent,
        }

    rows = _pool(run, range(config.size("trilinear")))
    return SuiteResult("trilinear", d, rows, {"max_ratio": max(r["ratio"] for r in rows)})


def check_trilinear(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    steps.add_step("superlevel hypothesis holds at β'", {},
                   passed=all(r["hypothesis_ok"] for r in result.rows))
    bound = config.constant("trilinear_c_{d}")
    steps.add_step("trilinear ratio stays below the calibrated bound",
                   {"max_ratio": result.metrics["max_ratio"], "bound": bound},
                   passed=result.metrics["max_ratio"] <= bound)
    steps.add_step("doubling β' is always detected", {},
                   passed=all(r["adversarial_detected"] for r in result.rows))


# ---------------------------------------------------------------- lorentz

def lorentz_closed_form(dim: int) -> List[Dict[str, float]]:
    """Two-level function 1 on half a box and 4 on a quarter; exact L^{p,r} norms"""
    geometry = GridGeometry.from_voxels(np.zeros(dim), np.ones(dim), 4)
    values = np.zeros(geometry.shape)
    values[:2] = 1.0
    values[2] = 4.0
    f = GridFunction(geometry, values)
    p = (dim + 1) / dim
    results = []
    for r in (1.0, 2.0, math.inf):
        terms = np.array([0.5 ** (1 / p), 4 * 0.25 ** (1 / p)])
        expected = float(terms.max()) if math.isinf(r) else float(np.sum(terms ** r) ** (1 / r))
        results.append({"r": r, "norm": lorentz_norm(f, LorentzSpec(p=p, r=r)), "expected": expected})
    return results


def measure_lorentz(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension

    def run(i):
        b = _draw_ball(config, i)
        rows = []
        for levels in range(LORENTZ_LEVELS + 1):
            f, fstar = flat_pair(b, levels, config.voxels)
            q = _quadrature(config, f.support(), relative=True)
            report = flatness_gain(f, fstar, min(1.0, flatness(fstar)), q)
            rows.append({
                "dim": d, "draw": i, "levels": levels, "flatness": report.flatness, "ratio": report.ratio,
                "norm_f": report.norm_f, "norm_fstar": report.norm_fstar,
            })
        return rows

    rows = [row for batch in _pool(run, range(config.size("lorentz"))) for row in batch]
    fit = linregress(np.log([r["flatness"] for r in rows]), np.log([r["ratio"] for r in rows]))
    metrics = {"gamma": float(fit.slope), "closed_form": lorentz_closed_form(d)}
    return SuiteResult("lorentz", d, rows, metrics)


def check_lorentz(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    noise = config.tolerance("monotone_noise")
    monotone = True
    for draw in sorted({r["draw"] for r in result.rows}):
        sweep = sorted((r for r in result.rows if r["draw"] == draw), key=lambda r: -r["flatness"])
        monotone &= all(b["ratio"] <= a["ratio"] * (1 + noise) for a, b in zip(sweep, sweep[1:]))
    steps.add_step("flatness gain is nonincreasing as f★ flattens", {}, passed=monotone)

    gamma = config.constant("lorentz_gamma_{d}")
    bound = config.constant("lorentz_c_{d}")
    worst = max(r["ratio"] / r["flatness"] ** gamma for r in result.rows)
    steps.add_step("ratio <= C η^γ", {"max": worst, "C": bound, "gamma": gamma}, passed=worst <= bound)
    for case in result.metrics["closed_form"]:
        steps.add_step(f"L^(p,{case['r']:g}) norm of the two-level function is exact", case,
                       passed=math.isclose(case["norm"], case["expected"], rel_tol=1e-12))


# ---------------------------------------------------------------- extract

def _extract_row(d: int, case: str, E: GridSet, Estar: GridSet, q: QuadratureSpec) -> Dict[str, Any]:
    row = {"dim": d, "case": case, "rho": None, "first_measure_ratio": None,
           "second_measure_ratio": None, "retention": None, "epsilon": score(E, Estar, q).epsilon}
    try:
        ball, report = extract_ball(E, Estar, q)
    except ExtractionFailed as e:
        logger.warning(f"Extraction failed on {case}: {e.message}")
        return row
    row.update(rho=ball.rho, first_measure_ratio=report.first_measure_ratio,
               second_measure_ratio=report.second_measure_ratio, retention=report.retention)
    return row


def _sweep_exponent(rows: List[Dict[str, Any]]) -> Optional[float]:
    """A in |B_env| <= C ε^{-A} |E| fitted over the dilution sweep"""
    usable = [r for r in rows if r["first_measure_ratio"]]
    if len(usable) < 2:
        return None
    fit = linregress(np.log([r["epsilon"] for r in usable]), np.log([r["first_measure_ratio"] for r in usable]))
    return float(-fit.slope)


def measure_extract(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension
    exponent = (d + 1) / (2 * d)

    def run(i):
        b = _draw_ball(config, i)
        E, Estar = rasterize_pair(b, config.voxels)
        q = _quadrature(config, E, Estar, relative=True)
        rows = [_extract_row(d, f"ball_{i}", E, Estar, q)]

        word = random_word(d, 3, config.item_seed(i, 1), ("translation", "shear", "rotation", "parabolic_dilation"))
        tE, tEstar = rasterize_pair(apply_ball(word, b), config.voxels)
        rows.append(_extract_row(d, f"transformed_{i}", tE, tEstar, _quadrature(config, tE, tEstar, relative=True)))

        if i < 2:
            for lam in (0.5, 2.0):
                dilated = apply_ball(SymmetryElement.parabolic_dilation(lam, d), b)
                dE, dEstar = rasterize_pair(dilated, config.voxels)
                rows.append(_extract_row(d, f"dilated_{i}_{lam:g}", dE, dEstar,
                                         _quadrature(config, dE, dEstar, relative=True)))
            for k in range(1, DILUTION_STEPS):
                wE, wEstar = dilute(E, Estar, 2.0 ** (k * exponent), seed=config.item_seed(i, 2))
                rows.append(_extract_row(d, f"diluted_{i}_{k}", wE, wEstar, q))
        return rows

    rows = [row for batch in _pool(run, range(config.size("extract"))) for row in batch]
    by_case = {r["case"]: r for r in rows}

    equivariance = []
    sweeps = []
    for i in range(min(2, config.size("extract"))):
        base = by_case[f"ball_{i}"]
        for lam in (0.5, 2.0):
            moved = by_case[f"dilated_{i}_{lam:g}"]
            if base["rho"] and moved["rho"]:
                equivariance.append(abs(moved["rho"] / (lam * lam * base["rho"]) - 1))
            else:
                equivariance.append(None)
        sweep = [base] + [by_case[f"diluted_{i}_{k}"] for k in range(1, DILUTION_STEPS)]
        sweeps.append(_sweep_exponent(sweep))

    metrics = {"equivariance": equivariance, "sweep_exponents": sweeps}
    return SuiteResult("extract", d, rows, metrics)


def check_extract(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    retention = config.constant("extract_retention")
    factor = config.constant("extract_measure_factor")
    for prefix in ("ball_", "transformed_"):
        rows = [r for r in result.rows if r["case"].startswith(prefix)]
        steps.add_step(f"{prefix.rstrip('_')} pairs keep at least {retention:g} of the incidence",
                       {"min": min((r["retention"] or 0.0 for r in rows), default=None)},
                       passed=all(r["retention"] is not None and r["retention"] >= retention for r in rows))
    balls = [r for r in result.rows if r["case"].startswith("ball_")]
    within = all(
        r["first_measure_ratio"] is not None
        and 1 / factor <= r["first_measure_ratio"] <= factor
        and 1 / factor <= r["second_measure_ratio"] <= factor
        for r in balls
    )
    steps.add_step(f"recovered envelopes are within a factor {factor:g} of the inputs", {}, passed=within)
    changes = result.metrics["equivariance"]
    steps.add_step("ρ scales by λ² under parabolic dilation", {"changes": changes},
                   passed=all(c is not None and c <= config.tolerance("equivariance") for c in changes))
    sweeps = result.metrics["sweep_exponents"]
    reproducible = all(a is not None and math.isfinite(a) for a in sweeps)
    if reproducible and len(sweeps) > 1:
        reproducible = max(sweeps) - min(sweeps) <= config.tolerance("sweep_reproducibility")
    steps.add_step("dilution sweep exponent is finite and reproducible", {"exponents": sweeps}, passed=reproducible)


# ---------------------------------------------------------------- lambda0

def _lambda0_row(d: int, family: str, n_centers: Optional[int], E: GridSet, Estar: GridSet, q: QuadratureSpec):
    t, t_star = E.measure(), Estar.measure()
    pairing = bilinear(E, Estar, q, localized=True)
    reference = lambda0_reference(t, t_star, d)
    return {
        "dim": d, "family": family, "n_centers": n_centers, "t": t, "t_star": t_star,
        "pairing": pairing, "reference": reference, "ratio": pairing / reference,
        "epsilon": score(E, Estar, q).epsilon,
    }


def cluster_row(d: int, N: int, E: GridSet, Estar: GridSet, q: QuadratureSpec) -> Dict[str, Any]:
    """Λ₀ row of one paraboloid cluster plus the smallest T χ_E★ over E"""
    row = _lambda0_row(d, "paraboloid_cluster", N, E, Estar, q)
    row["min_T"] = float(evaluate_T(Estar, E.occupied_centers(), q).min())
    return row


def lambda0_metrics(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    ratios = [r["ratio"] for r in rows]
    clusters = [r["min_T"] for r in rows if r["family"] == "paraboloid_cluster"]
    return {
        "min_ratio": min(ratios),
        "max_ratio": max(ratios),
        "min_T_on_clusters": min(clusters) if clusters else None,
    }


def measure_lambda0(config: ExperimentConfig) -> SuiteResult:
    d = config.dimension
    delta = CLUSTER_DELTA[d]

    def cluster(N):
        E, Estar = gen_paraboloid_cluster(N, delta, config.item_seed(N, 3), d)
        return cluster_row(d, N, E, Estar, _quadrature(config, E, Estar))

    def ball(i):
        E, Estar = rasterize_pair(_draw_ball(config, i), config.voxels)
        return _lambda0_row(d, "ball_envelope", None, E, Estar, _quadrature(config, E, Estar, relative=True))

    rows = _pool(cluster, CLUSTER_SIZES[d]) + _pool(ball, range(config.size("lambda0")))
    return SuiteResult("lambda0", d, rows, lambda0_metrics(rows))


def check_lambda0(result: SuiteResult, config: ExperimentConfig, steps: SuiteLogger):
    low, high = config.constant("lambda0_low_{d}"), config.constant("lambda0_high_{d}")
    m = result.metrics
    steps.add_step("localized pairing is comparable to Λ₀(|E|, |E★|)",
                   {"min": m["min_ratio"], "max": m["max_ratio"], "low": low, "high": high},
                   passed=low <= m["min_ratio"] and m["max_ratio"] <= high)
    clusters = sorted((r for r in result.rows if r["family"] == "paraboloid_cluster"), key=lambda r: r["n_centers"])
    noise = config.tolerance("monotone_noise")
    decreasing = all(b["epsilon"] <= a["epsilon"] * (1 + noise) for a, b in zip(clusters, clusters[1:]))
    steps.add_step("sparse clusters lose quasiextremality as N grows",
                   {"epsilon": [r["epsilon"] for r in clusters]}, passed=decreasing)
    # every point of E must see a full parabola arc inside the tubes
    floor = config.constant("lambda0_cluster_floor_{d}")
    lowest = [r["min_T"] for r in clusters]
    steps.add_step("T χ_E★ stays above the cluster floor on every ball of E",
                   {"min": min(lowest) if lowest else None, "floor": floor},
                   passed=bool(lowest) and min(lowest) >= floor)


# ---------------------------------------------------------------- runner

SUITES: Dict[str, Tuple[Callable[[ExperimentConfig], SuiteResult], Callable]] = {
    "rwt": (measure_rwt, check_rwt),
    "prop15": (measure_prop15, check_prop15),
    "cover": (measure_cover, check_cover),
    "symmetry": (measure_symmetry, check_symmetry),
    "tower": (measure_tower, check_tower),
    "slicing": (measure_slicing, check_slicing),
    "convexify": (measure_convexify, check_convexify),
    "detmoment": (measure_detmoment, check_detmoment),
    "trilinear": (measure_trilinear, check_trilinear),
    "lorentz": (measure_lorentz, check_lorentz),
    "extract": (measure_extract, check_extract),
    "lambda0": (measure_lambda0, check_lambda0),
}


def measure(name: str, config: ExperimentConfig) -> SuiteResult:
    if name not in SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; choose from {', '.join(SUITE_NAMES)}")
    return SUITES[name][0](config)


def run_suite(name: str, config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> int:
    """Runs one suite and writes its reports; 0 when every assertion passes, 1 otherwise"""
    if name not in SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; choose from {', '.join(SUITE_NAMES)}")
    config.require_constants(name)
    started = time.perf_counter()
    logger.info(f"Running suite {name} in d={config.dimension}")

    measure_pass, check_pass = SUITES[name]
    result = measure_pass(config)
    steps = SuiteLogger(name)
    check_pass(result, config, steps)
    write_suite_reports(result, steps, out_dir)

    checks = steps.assertions
    logger.info(SUITE_SUMMARY.format(
        suite=name,
        status="PASS" if steps.passed else "FAIL",
        passed=sum(1 for step in checks if step["passed"]),
        total=len(checks),
        rows=len(result.rows),
        seconds=time.perf_counter() - started,
    ))
    return 0 if steps.passed else 1
