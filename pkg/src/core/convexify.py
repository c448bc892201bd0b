"""Convexify Module

Balanced convex approximation of a set by a halving stopping time. The
candidate family is symmetric intervals on the line and intersections of
symmetric slabs over a fixed fan of directions in the plane. Starting from a
set 𝒞 with |𝒞| = 2^m |S|, the process moves to a candidate of half the
measure while that candidate keeps at least a (1 - c₀ 2^{-ηm}) fraction of
the mass of S, and stops otherwise.
"""

import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import brentq

from .errors import DimensionUnsupported, EmptySet
from .grid import GridSet
from ..config.settings import COMBINATORICS_SETTINGS, RUNTIME_SETTINGS
from ..utils.async_utils import map_bounded
from ..utils.logger import Logger

logger = Logger(__name__)


class Slab(BaseModel):
    direction: List[float]
    half_width: float = Field(gt=0)


class ConvexApprox(BaseModel):
    center_offset: List[float]
    slabs: List[Slab]
    measure: float = Field(gt=0)
    exclusion_constant: float
    steps: int = 0  # the final m with |𝒞| = 2^m |S|
    retained_fraction: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.center_offset)

    def directions(self) -> np.ndarray:
        return np.array([slab.direction for slab in self.slabs], dtype=float)

    def widths(self) -> np.ndarray:
        return np.array([slab.half_width for slab in self.slabs], dtype=float)

    def contains(self, points: np.ndarray) -> np.ndarray:
        shifted = np.atleast_2d(points) - np.asarray(self.center_offset)
        return slab_contains(shifted, self.directions(), self.widths())

    def vertices(self) -> np.ndarray:
        """Interval endpoints (n=1) or polygon corners (n=2) around the offset"""
        center = np.asarray(self.center_offset)
        if self.dim == 1:
            width = float(np.min(self.widths()))
            return center + np.array([[-width], [width]])
        return center + _polygon(self.directions(), self.widths())


def slab_contains(points: np.ndarray, directions: np.ndarray, widths: np.ndarray) -> np.ndarray:
    return np.all(np.abs(points @ directions.T) <= widths, axis=1)


def _fan(n: int, count: int) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1))
    angles = np.arange(count) * math.pi / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _clip(polygon: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to ⟨p, normal⟩ <= offset"""
    if polygon.shape[0] == 0:
        return polygon
    values = polygon @ normal - offset
    kept = []
    for i in range(polygon.shape[0]):
        j = (i + 1) % polygon.shape[0]
        p, q = polygon[i], polygon[j]
        if values[i] <= 0:
            kept.append(p)
        if (values[i] < 0 < values[j]) or (values[j] < 0 < values[i]):
            kept.append(p + (q - p) * values[i] / (values[i] - values[j]))
    return np.array(kept) if kept else np.zeros((0, 2))


def _polygon(directions: np.ndarray, widths: np.ndarray) -> np.ndarray:
    reach = 2 * float(np.max(widths))
    polygon = np.array([[-reach, -reach], [reach, -reach], [reach, reach], [-reach, reach]])
    for normal, width in zip(directions, widths):
        polygon = _clip(polygon, normal, width)
        polygon = _clip(polygon, -normal, width)
    return polygon


def _shoelace(polygon: np.ndarray) -> float:
    if polygon.shape[0] < 3:
        return 0.0
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def slab_measure(directions: np.ndarray, widths: np.ndarray) -> float:
    """Measure of the intersection of the symmetric slabs |⟨p, ν⟩| <= w"""
    if directions.shape[1] == 1:
        return 2.0 * float(np.min(widths / np.abs(directions[:, 0])))
    return _shoelace(_polygon(directions, widths))


def _half_cut(directions: np.ndarray, widths: np.ndarray, k: int, total: float) -> np.ndarray:
    """Widths with slab k narrowed until the measure halves"""
    def excess(width):
        trial = widths.copy()
        trial[k] = width
        return slab_measure(directions, trial) - total / 2

    narrowed = widths.copy()
    narrowed[k] = brentq(excess, widths[k] * 1e-9, widths[k], xtol=1e-12 * widths[k])
    return narrowed


def _candidates(directions: np.ndarray, widths: np.ndarray, total: float) -> List[np.ndarray]:
    n = directions.shape[1]
    scaled = widths * 2.0 ** (-1.0 / n)
    if n == 1:
        return [scaled]
    cuts = map_bounded(
        lambda k: _half_cut(directions, widths, k, total),
        range(directions.shape[0]),
        RUNTIME_SETTINGS["max_workers"],
    )
    return [scaled] + cuts


def _center(points: np.ndarray, balanced: bool) -> np.ndarray:
    if balanced:
        return np.zeros(points.shape[1])
    return np.median(points, axis=0)


def convexify(
    S: GridSet,
    eta: float,
    balanced: bool = True,
    c0: Optional[float] = None,
    directions: Optional[int] = None,
) -> ConvexApprox:
    n = S.dim
    if n > 2:
        raise DimensionUnsupported(f"convexify supports n <= 2, got n={n}")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if S.is_empty():
        raise EmptySet("convexify needs measure(S) > 0")
    c0 = COMBINATORICS_SETTINGS["convexify_c0"] if c0 is None else c0
    count = COMBINATORICS_SETTINGS["convexify_directions"] if directions is None else directions

    points = S.occupied_centers()
    center = _center(points, balanced)
    shifted = points - center
    fan = _fan(n, count)
    mass = S.measure()

    # start from the 1 - 1/32 mass quantile along each direction, widened by half a voxel
    half_voxel = 0.5 * np.abs(fan) @ S.spacing
    widths = np.quantile(np.abs(shifted @ fan.T), 1 - 1 / 32, axis=0) + half_voxel
    total = slab_measure(fan, widths)
    m = max(0, math.ceil(math.log2(total / mass)))
    widths = widths * (2.0 ** m * mass / total) ** (1.0 / n)
    total = 2.0 ** m * mass

    exclusion = 1.0
    retained = float(np.mean(slab_contains(shifted, fan, widths)))
    for _ in range(COMBINATORICS_SETTINGS["convexify_max_steps"]):
        threshold = 1 - c0 * 2.0 ** (-eta * m)
        candidates = _candidates(fan, widths, total)
        fractions = [float(np.mean(slab_contains(shifted, fan, w))) for w in candidates]
        best = int(np.argmax(fractions))
        exclusion = min(retained - f for f in fractions)
        if fractions[best] < threshold:
            break
        widths, retained = candidates[best], fractions[best]
        total /= 2
        m -= 1
        logger.debug(f"Convexify descended to m={m}, retained {retained:.4f}")

    result = ConvexApprox(
        center_offset=center.tolist(),
        slabs=[Slab(direction=d.tolist(), half_width=float(w)) for d, w in zip(fan, widths)],
        measure=total,
        exclusion_constant=float(exclusion),
        steps=m,
        retained_fraction=retained,
    )
    logger.info(
        f"Convexified |S|={mass:.4g} into |C|={total:.4g} (m={m}), exclusion {exclusion:.4f}"
    )
    return result


def verify_exclusion(S: GridSet, approx: ConvexApprox, samples: int = 512) -> Tuple[bool, float]:
    """
    Exhaustive check on the line: every symmetric interval 𝒞' about the
    offset with |𝒞'| <= |𝒞|/2 leaves at least the exclusion constant of the
    mass of S inside 𝒞 ∖ 𝒞'. Returns (ok, worst excluded fraction).
    """
    if S.dim != 1:
        raise DimensionUnsupported("verify_exclusion is exhaustive on the line only")
    points = S.occupied_centers()[:, 0] - approx.center_offset[0]
    half_width = float(np.min(approx.widths()))
    inside = np.abs(points) <= half_width
    worst = math.inf
    for radius in np.linspace(0, half_width * 2.0 ** -1.0, samples + 1)[1:]:
        excluded = float(np.mean(inside & (np.abs(points) > radius)))
        worst = min(worst, excluded)
    return worst >= approx.exclusion_constant - 1e-12, worst
