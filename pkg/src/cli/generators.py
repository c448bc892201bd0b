"""Generators Module

Corpus generators: paraboloid clusters (sparse pairs that are near-extremal
for the localized pairing only), random set pairs, diluted pairs for the
quasiextremality sweep, and stacked flat functions for the flatness sweep.
"""

import math
from typing import List, Optional, Tuple

import numpy as np
from tenacity import RetryCallState, retry, retry_if_exception_type, stop_after_attempt

from .config import GeneratorSpec
from ..core.balls import BallParams, default_voxels, make_ball, rasterize_envelope, rasterize_pair, envelope
from ..core.errors import SeparationFailed
from ..core.grid import GridFunction, GridGeometry, GridSet, solve_second_last
from ..core.symmetries import GENERATOR_KINDS, random_word, transform_set
from ..utils.logger import Logger
from ..utils.rng import stream

logger = Logger(__name__)

SEPARATION_ATTEMPTS = 5


def _unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def cluster_reference_measures(N: int, delta: float, dim: int) -> Tuple[float, float]:
    """N ω_d δ^d and N times the measure of one 2δ tube around a unit paraboloid patch"""
    if dim == 2:
        patch = math.sqrt(5) + math.asinh(2) / 2  # ∫_{-1}^{1} sqrt(1 + 4t^2) dt
    else:
        patch = 2 * math.pi * (5 ** 1.5 - 1) / 12  # ∫_{|t|<=1} sqrt(1 + 4|t|^2) dt
    return N * _unit_ball_volume(dim) * delta ** dim, N * 4 * delta * patch


def _log_resample(retry_state: RetryCallState):
    logger.warning(
        f"Center draw attempt {retry_state.attempt_number} of {SEPARATION_ATTEMPTS} failed: "
        f"{retry_state.outcome.exception()}; resampling"
    )


@retry(
    stop=stop_after_attempt(SEPARATION_ATTEMPTS),
    retry=retry_if_exception_type(SeparationFailed),
    before_sleep=_log_resample,
    reraise=True,
)
def _draw_centers(rng: np.random.Generator, N: int, delta: float, dim: int) -> np.ndarray:
    centers = rng.uniform(-1, 1, size=(N, dim))
    if N > 1:
        gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
        gaps[np.diag_indices(N)] = np.inf
        if gaps.min() < 4 * delta:
            raise SeparationFailed(f"centers {gaps.min():.4f} apart, below 4δ={4 * delta:.4f}")
    return centers


def gen_paraboloid_cluster(
    N: int,
    delta: float,
    seed: int,
    dim: int = 2,
    voxels_per_delta: float = 2.0,
) -> Tuple[GridSet, GridSet]:
    """
    E = union of δ-balls at N separated centers z_j; E★ = 2δ-tube around the
    union of the downward paraboloids {y_d = z_d - |y' - z'|^2, |y' - z'| <= 1}.
    """
    if N < 1 or not delta > 0:
        raise ValueError("need N >= 1 and delta > 0")
    rng = stream(seed)
    try:
        centers = _draw_centers(rng, N, delta, dim)
    except SeparationFailed as e:
        logger.error(f"No 4δ-separated centers after {SEPARATION_ATTEMPTS} draws: {e}")
        raise SeparationFailed(f"centers closer than 4δ after {SEPARATION_ATTEMPTS} draws")
    spacing = delta / voxels_per_delta

    lower, upper = centers.min(axis=0) - 2 * delta, centers.max(axis=0) + 2 * delta
    first = GridGeometry.from_bounds(lower, upper, spacing)

    def in_balls(points):
        inside = np.zeros(points.shape[0], dtype=bool)
        for z in centers:
            inside |= np.sum((points - z) ** 2, axis=1) < delta * delta
        return inside

    lower_star = np.append(centers.min(axis=0)[:-1] - 1 - 2 * delta, centers[:, -1].min() - 1 - 4 * delta)
    upper_star = np.append(centers.max(axis=0)[:-1] + 1 + 2 * delta, centers[:, -1].max() + 4 * delta)
    second = GridGeometry.from_bounds(lower_star, upper_star, spacing)

    def in_tubes(points):
        inside = np.zeros(points.shape[0], dtype=bool)
        for z in centers:
            offset = points[:, :-1] - z[:-1]
            radius_sq = np.sum(offset ** 2, axis=1)
            gap = np.abs(points[:, -1] - z[-1] + radius_sq)
            inside |= (radius_sq <= 1) & (gap < 2 * delta * np.sqrt(1 + 4 * radius_sq))
        return inside

    E = GridSet.from_predicate(first, in_balls)
    Estar = GridSet.from_predicate(second, in_tubes)
    logger.info(f"Paraboloid cluster N={N}, δ={delta:g}: |E|={E.measure():.4g}, |E★|={Estar.measure():.4g}")
    return E, Estar


def random_ball(dim: int, rng: np.random.Generator, radius_range: Tuple[float, float] = (1 / 8, 8)) -> BallParams:
    """Random center and frame; radii and the r r★ product log-uniform over radius_range"""
    m = dim - 1
    low, high = np.log(radius_range[0]), np.log(radius_range[1])
    radii = np.exp(rng.uniform(low, high, m))
    rho = radii[0] * float(np.exp(rng.uniform(low, high)))
    x = rng.uniform(-1, 1, dim)
    y_prime = x[:-1] + rng.uniform(-1, 1, m)
    y = np.append(y_prime, solve_second_last(x[None, :], y_prime[None, :])[0])
    q, r = np.linalg.qr(rng.normal(size=(m, m)))
    basis = (q * np.sign(np.diag(r))).T
    return make_ball((x, y), basis, radii, rho / radii)


def _random_box(geometry: GridGeometry, rng: np.random.Generator, fill: float) -> GridSet:
    shape = np.asarray(geometry.shape)
    sides = np.maximum(1, np.rint(shape * rng.uniform(fill / 2, fill, shape.size))).astype(int)
    start = rng.integers(0, shape - sides + 1)
    occupancy = np.zeros(geometry.shape, dtype=bool)
    occupancy[tuple(slice(s, s + n) for s, n in zip(start, sides))] = True
    return GridSet(geometry, occupancy)


def _random_union(geometry: GridGeometry, rng: np.random.Generator, pieces: int, fill: float) -> GridSet:
    occupancy = np.zeros(geometry.shape, dtype=bool)
    for _ in range(pieces):
        occupancy |= _random_box(geometry, rng, fill).occupancy
    return GridSet(geometry, occupancy)


def gen_random_sets(spec: GeneratorSpec, seed: int, dim: int = 2, voxels: Optional[int] = None) -> Tuple[GridSet, GridSet]:
    rng = stream(seed)
    voxels = voxels or default_voxels(dim)
    params = spec.params
    if spec.family in ("voxel_union", "boxes"):
        extent = params.get("extent", 1.0)
        geometry = GridGeometry.from_voxels(np.full(dim, -extent), np.full(dim, extent), voxels)
        if spec.family == "boxes":
            return _random_box(geometry, rng, 0.6), _random_box(geometry, rng, 0.6)
        pieces = int(params.get("pieces", 4))
        return _random_union(geometry, rng, pieces, 0.25), _random_union(geometry, rng, pieces, 0.25)
    if spec.family == "ball_envelope":
        return rasterize_pair(random_ball(dim, rng), voxels)
    if spec.family == "transformed_envelope":
        E, Estar = rasterize_pair(random_ball(dim, rng), voxels)
        g = random_word(dim, int(params.get("length", 3)), int(rng.integers(0, 2 ** 31)), GENERATOR_KINDS)
        return transform_set(E, g, "first"), transform_set(Estar, g, "second")
    if spec.family == "paraboloid_cluster":
        return gen_paraboloid_cluster(
            int(params.get("N", 8)), params.get("delta", 0.05), int(rng.integers(0, 2 ** 31)), dim,
        )
    raise ValueError(f"unknown generator family {spec.family!r}")


def corpus_seeds(specs: List[GeneratorSpec], base_seed: int, limit: Optional[int] = None) -> List[Tuple[GeneratorSpec, int]]:
    """(spec, seed) for every configured generator draw, in order"""
    items = []
    for spec in specs:
        for _ in range(spec.count):
            items.append((spec, base_seed * 100_003 + len(items) * 7_919))
    return items if limit is None else items[:limit]


def corpus(specs: List[GeneratorSpec], base_seed: int, dim: int, voxels: Optional[int] = None, limit: Optional[int] = None):
    """(family, seed, E, E★) for every configured generator draw"""
    return [(spec.family, seed, *gen_random_sets(spec, seed, dim, voxels)) for spec, seed in corpus_seeds(specs, base_seed, limit)]


def _extend_last_axis(S: GridSet, below: int, above: int) -> GridSet:
    """Same voxels on a grid padded by whole rows along the last axis"""
    shape = S.shape[:-1] + (S.shape[-1] + below + above,)
    origin = S.origin.copy()
    origin[-1] -= below * S.spacing[-1]
    occupancy = np.zeros(shape, dtype=bool)
    occupancy[..., below:below + S.shape[-1]] = S.occupancy
    return GridSet(GridGeometry(origin, S.spacing, shape), occupancy)


def _add_block(S: GridSet, extra: int, at_bottom: bool, gap_to: float) -> GridSet:
    """
    Adds `extra` voxels in whole horizontal rows beyond `gap_to` on the last
    axis, below it when at_bottom and above it otherwise.
    """
    if extra <= 0:
        return S
    columns = int(np.prod(S.shape[:-1]))
    rows = math.ceil(extra / columns)
    h = S.spacing[-1]
    if at_bottom:
        first_row = math.floor((gap_to - S.origin[-1]) / h) - 1 - rows
        below, above = max(0, -first_row), 0
    else:
        first_row = math.ceil((gap_to - S.origin[-1]) / h) + 1
        below, above = 0, max(0, first_row + rows - S.shape[-1])
    grown = _extend_last_axis(S, below, above)
    start = first_row + below
    block = np.zeros(columns * rows, dtype=bool)
    block[:extra] = True
    occupancy = grown.occupancy.copy()
    view = occupancy[..., start:start + rows]
    view[...] = block.reshape(rows, *S.shape[:-1]).transpose(*range(1, S.dim), 0)
    return GridSet(grown.geometry, occupancy)


def dilute(E: GridSet, Estar: GridSet, factor: float, seed: int = 0) -> Tuple[GridSet, GridSet]:
    """
    Grows both sets by `factor` in measure with blocks that meet no
    incidences: E gains rows below every point of E★, E★ gains rows above
    every point of E. Epsilon drops by factor^{-2d/(d+1)}.
    """
    if factor < 1:
        raise ValueError("factor must be at least 1")
    box_e, box_s = E.bounding_box(), Estar.bounding_box()
    if box_e is None or box_s is None:
        return E, Estar
    floor = min(box_e[0][-1], box_s[0][-1])
    ceiling = max(box_e[1][-1], box_s[1][-1])
    extra_e = int(round((factor - 1) * E.count))
    extra_s = int(round((factor - 1) * Estar.count))
    diluted = _add_block(E, extra_e, at_bottom=True, gap_to=floor)
    diluted_star = _add_block(Estar, extra_s, at_bottom=False, gap_to=ceiling)
    logger.debug(f"Diluted pair by {factor:.3g} (seed {seed}): +{extra_e} / +{extra_s} voxels")
    return diluted, diluted_star


def flat_pair(b: BallParams, levels: int, voxels: Optional[int] = None) -> Tuple[GridFunction, GridFunction]:
    """
    f = χ of the second envelope of b; f★ = Σ_l 2^l χ_{F_l} with F_0 the
    first envelope and F_l (l >= 1) blocks below everything with
    |F_l| = |F_0| 2^{-l p}, p = (d+1)/d. Every level carries the same
    2^l |F_l|^{1/p}, and no point of f lies below a block, so adding levels
    flattens f★ without adding pairing.
    """
    voxels = voxels or default_voxels(b.dim)
    pair = envelope(b)
    lower = rasterize_envelope(pair, "second", voxels)
    F0 = rasterize_envelope(pair, "first", voxels)
    p = (b.dim + 1) / b.dim
    floor = min(lower.bounding_box()[0][-1], F0.bounding_box()[0][-1])

    values = F0.occupancy.astype(float)
    current = F0
    h = F0.spacing[-1]
    for level in range(1, levels + 1):
        extra = max(1, int(round(F0.count * 2.0 ** (-level * p))))
        floor = min(floor, current.bounding_box()[0][-1])
        grown = _add_block(current, extra, at_bottom=True, gap_to=floor)
        shift = int(round((current.origin[-1] - grown.origin[-1]) / h))
        padded = np.zeros(grown.shape)
        padded[..., shift:shift + values.shape[-1]] = values
        new_cells = grown.occupancy & ~(padded > 0)
        padded[new_cells] = 2.0 ** level
        values, current = padded, grown
    return lower.indicator(), GridFunction(current.geometry, values)


def random_slicing_domain(dim: int, rng: np.random.Generator, voxels: Optional[int] = None) -> Tuple[GridSet, np.ndarray]:
    """
    Random symmetric A with eigenvalues in [1/2, 2] and a random union of
    boxes ω over (s, u) whose s-marginal sits inside A(unit ball).
    """
    m = dim - 1
    voxels = voxels or (64 if m == 1 else 16)
    q, r = np.linalg.qr(rng.normal(size=(m, m)))
    q = q * np.sign(np.diag(r))
    eigenvalues = np.exp(rng.uniform(np.log(0.5), np.log(2.0), m))
    A = q @ np.diag(eigenvalues) @ q.T
    A = (A + A.T) / 2
    # the cube of half-width λ_min/√m lies inside A(unit ball)
    reach = 0.99 * eigenvalues.min() / math.sqrt(m)
    lower = np.append(np.full(m, -reach), np.full(m, -1.0))
    upper = np.append(np.full(m, reach), np.full(m, 1.0))
    geometry = GridGeometry.from_voxels(lower, upper, voxels)
    omega = _random_union(geometry, rng, 3, 0.6)
    return omega, A
