"""Transform Module

Riemann-sum evaluation of the parabolic averaging operator
    T f(x) = ∫ f(x' - t, x_d - |t|^2) dt
its localized variant T₀ (|t| <= 1), its transpose, the bilinear incidence
functional and the quasiextremality scores built from it.
"""

import math
from typing import Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .errors import EmptySet, ResolutionTooCoarse
from .grid import GridFunction, GridGeometry, GridSet
from ..config.settings import MONTE_CARLO_SETTINGS, QUADRATURE_SETTINGS
from ..utils.logger import Logger
from ..utils.rng import shard_sizes, stream

logger = Logger(__name__)

Target = Union[GridSet, GridFunction]


class QuadratureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_resolution: float = Field(default_factory=lambda: QUADRATURE_SETTINGS["t_resolution"], gt=0)
    t_bound: Union[Literal["auto"], float] = "auto"

    @field_validator("t_bound")
    @classmethod
    def _positive_bound(cls, value):
        if value != "auto" and not value > 0:
            raise ValueError("t_bound must be positive or 'auto'")
        return value

    def with_resolution(self, t_resolution: float) -> "QuadratureSpec":
        return self.model_copy(update={"t_resolution": float(t_resolution)})


class ScorePair(BaseModel):
    incidence: float = Field(ge=0)
    alpha: float = Field(ge=0)
    alpha_star: float = Field(ge=0)
    epsilon: float = Field(ge=0)
    measure_first: float = Field(ge=0)
    measure_second: float = Field(ge=0)


def _target_arrays(target: Target) -> Tuple[GridGeometry, np.ndarray, Optional[Tuple[np.ndarray, np.ndarray]]]:
    if isinstance(target, GridSet):
        return target.geometry, target.occupancy.astype(float), target.bounding_box()
    return target.geometry, target.values, target.support().bounding_box()


def _check_resolution(q: QuadratureSpec, geometry: GridGeometry):
    # t moves x' directly; x_d only through the smooth |t|^2
    finest = float(np.min(geometry.spacing[:-1]))
    if q.t_resolution > finest * (1 + 1e-9):
        raise ResolutionTooCoarse(
            f"t_resolution {q.t_resolution:g} exceeds the finest horizontal spacing {finest:g}"
        )


def t_nodes(
    points_box: Tuple[np.ndarray, np.ndarray],
    target_box: Tuple[np.ndarray, np.ndarray],
    q: QuadratureSpec,
    localized: bool = False,
    transpose: bool = False,
) -> np.ndarray:
    """
    Midpoint nodes of the t-grid that can reach the target from the points.
    Nodes sit on the lattice (k + 1/2) * t_resolution.
    """
    h = q.t_resolution
    p_lo, p_hi = points_box
    s_lo, s_hi = target_box
    dim = p_lo.size
    if q.t_bound == "auto":
        if transpose:
            lower = s_lo[:-1] - p_hi[:-1] - h
            upper = s_hi[:-1] - p_lo[:-1] + h
            radius_sq = s_hi[-1] - p_lo[-1]
        else:
            lower = p_lo[:-1] - s_hi[:-1] - h
            upper = p_hi[:-1] - s_lo[:-1] + h
            radius_sq = p_hi[-1] - s_lo[-1]
        if radius_sq < 0:
            return np.zeros((0, dim - 1))
        radius = math.sqrt(radius_sq) + h
    else:
        radius = float(q.t_bound)
        lower = np.full(dim - 1, -radius)
        upper = np.full(dim - 1, radius)
    if localized:
        radius = min(radius, 1.0)
    lower = np.maximum(lower, -radius - h)
    upper = np.minimum(upper, radius + h)
    if np.any(upper <= lower):
        return np.zeros((0, dim - 1))

    axes = []
    for lo, hi in zip(lower, upper):
        k_lo = math.floor(lo / h)
        k_hi = math.ceil(hi / h)
        axes.append((np.arange(k_lo, k_hi) + 0.5) * h)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    norms = np.sum(nodes * nodes, axis=1)
    keep = norms <= radius * radius
    if localized:
        keep &= norms <= 1.0
    return nodes[keep]


def evaluate_T(
    target: Target,
    points: np.ndarray,
    q: QuadratureSpec,
    localized: bool = False,
    transpose: bool = False,
) -> np.ndarray:
    """
    T(target) at each row of points, or the transpose
    T*g(y) = ∫ g(y' + t, y_d + |t|^2) dt when transpose is set.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    geometry, array, target_box = _target_arrays(target)
    _check_resolution(q, geometry)
    n = points.shape[0]
    totals = np.zeros(n)
    if n == 0 or target_box is None:
        return totals

    points_box = (points.min(axis=0), points.max(axis=0))
    nodes = t_nodes(points_box, target_box, q, localized=localized, transpose=transpose)
    if nodes.shape[0] == 0:
        return totals

    sign = -1.0 if transpose else 1.0
    chunk = max(1, QUADRATURE_SETTINGS["max_chunk_points"] // n)
    for start in range(0, nodes.shape[0], chunk):
        t = nodes[start:start + chunk]
        shifted = np.empty((t.shape[0], n, points.shape[1]))
        shifted[..., :-1] = points[None, :, :-1] - sign * t[:, None, :]
        shifted[..., -1] = points[None, :, -1] - sign * np.sum(t * t, axis=1)[:, None]
        totals += geometry.lookup(array, shifted).sum(axis=0)
    return totals * q.t_resolution ** (points.shape[1] - 1)


def apply_T(
    f: Target,
    out: GridGeometry,
    q: QuadratureSpec,
    localized: bool = False,
) -> GridFunction:
    values = evaluate_T(f, out.all_centers(), q, localized=localized)
    return GridFunction(out, values.reshape(out.shape))


def apply_T_transpose(
    g: Target,
    out: GridGeometry,
    q: QuadratureSpec,
    localized: bool = False,
) -> GridFunction:
    values = evaluate_T(g, out.all_centers(), q, localized=localized, transpose=True)
    return GridFunction(out, values.reshape(out.shape))


def bilinear(E: GridSet, Estar: GridSet, q: QuadratureSpec, localized: bool = False) -> float:
    """⟨T χ_E★, χ_E⟩ summed over the occupied voxels of E"""
    if E.is_empty() or Estar.is_empty():
        return 0.0
    values = evaluate_T(Estar, E.occupied_centers(), q, localized=localized)
    return float(values.sum() * E.geometry.voxel_volume)


def bilinear_transpose(E: GridSet, Estar: GridSet, q: QuadratureSpec, localized: bool = False) -> float:
    """⟨χ_E★, T* χ_E⟩ summed over the occupied voxels of E★"""
    if E.is_empty() or Estar.is_empty():
        return 0.0
    values = evaluate_T(E, Estar.occupied_centers(), q, localized=localized, transpose=True)
    return float(values.sum() * Estar.geometry.voxel_volume)


def bilinear_mc(
    E: GridSet,
    Estar: GridSet,
    seed: int,
    n: int,
    block_size: Optional[int] = None,
) -> Tuple[float, float]:
    """
    Monte Carlo estimate of the incidence functional and its standard error.
    Blocks of draws use consecutive shards of one counter-based stream.
    """
    if E.is_empty():
        raise EmptySet("bilinear_mc needs measure(E) > 0")
    if n < 1:
        raise ValueError("n must be at least 1")
    box = Estar.bounding_box()
    if box is None:
        return 0.0, 0.0

    lower, upper = box
    width = upper[:-1] - lower[:-1]
    box_volume = float(np.prod(width))
    indices = E.occupied_indices()
    block_size = block_size or MONTE_CARLO_SETTINGS["block_size"]

    hits = []
    for shard, size in enumerate(shard_sizes(n, block_size)):
        rng = stream(seed, shard)
        chosen = indices[rng.integers(0, indices.shape[0], size=size)]
        x = E.origin + (chosen + rng.random((size, E.dim))) * E.spacing
        u = rng.random((size, E.dim - 1))
        # t uniform on the Minkowski difference x' - box'
        t = x[:, :-1] - upper[:-1] + u * width
        y = np.empty_like(x)
        y[:, :-1] = x[:, :-1] - t
        y[:, -1] = x[:, -1] - np.sum(t * t, axis=1)
        hits.append(Estar.contains_many(y).astype(float))

    samples = np.concatenate(hits) * box_volume
    measure = E.measure()
    estimate = measure * float(samples.mean())
    stderr = 0.0
    if n > 1:
        stderr = measure * float(samples.std(ddof=1)) / math.sqrt(n)
    return estimate, stderr


def score(E: GridSet, Estar: GridSet, q: QuadratureSpec, localized: bool = False) -> ScorePair:
    measure_first = E.measure()
    measure_second = Estar.measure()
    if measure_first <= 0 or measure_second <= 0:
        raise EmptySet("score needs both sets to have positive measure")
    incidence = bilinear(E, Estar, q, localized=localized)
    exponent = E.dim / (E.dim + 1)
    return ScorePair(
        incidence=incidence,
        alpha=incidence / measure_first,
        alpha_star=incidence / measure_second,
        epsilon=incidence / (measure_first ** exponent * measure_second ** exponent),
        measure_first=measure_first,
        measure_second=measure_second,
    )


def lambda0_reference(t: float, t_star: float, dim: int) -> float:
    """min(t, t★, t^{d/(d+1)} t★^{d/(d+1)}), the size of the localized pairing"""
    exponent = dim / (dim + 1)
    return min(t, t_star, (t * t_star) ** exponent)
