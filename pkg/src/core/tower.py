"""Tower Module

Two-generation incidence chains from a single base point. Starting from a
pair (E, E★) with average incidence numbers α, α★ the tower picks x̄ in E and
collects the steps s with x̄ - (s,|s|^2) in E★ (the set Ω₁) and, for each s,
the return steps t with x̄ - (s,|s|^2) + (t,|t|^2) in E (the fiber of s).
Steps live on the midpoint lattice (k + 1/2) h of the quadrature, so every
stored (s, t) satisfies both memberships at the node itself.

The three-step variant starts one generation earlier, at x̄★ in E★, and
gathers the steps r with x̄★ + (r,|r|^2) in E before growing the two-step
tower from one of those points.
"""

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from .errors import NoIncidences, TowerFailed
from .grid import GridGeometry, GridSet, SpacePoint
from .slicing import RasterSpec, image_measure
from .transform import QuadratureSpec, bilinear, evaluate_T, t_nodes
from ..config.settings import COMBINATORICS_SETTINGS, QUADRATURE_SETTINGS, RUNTIME_SETTINGS
from ..utils.async_utils import map_bounded
from ..utils.logger import Logger
from ..utils.rng import stream

logger = Logger(__name__)

SIndex = Tuple[int, ...]


def _parabola(points: np.ndarray) -> np.ndarray:
    """(s, |s|^2) for each row of s"""
    return np.column_stack([points, np.sum(points * points, axis=1)])


def _lattice_geometry(nodes: np.ndarray, h: float) -> Tuple[GridGeometry, np.ndarray]:
    """Grid whose voxel centers are the given (k + 1/2) h nodes, with their indices"""
    k = np.rint(nodes / h - 0.5).astype(np.int64)
    k_lo = k.min(axis=0)
    shape = tuple(int(n) for n in k.max(axis=0) - k_lo + 1)
    return GridGeometry(k_lo * h, np.full(nodes.shape[1], h), shape), k - k_lo


@dataclass(frozen=True, eq=False)
class TowerData:
    base_point: SpacePoint
    omega1: GridSet
    fibers: Dict[SIndex, GridSet]
    alpha: float
    alpha_star: float

    @property
    def dim(self) -> int:
        return self.base_point.dim

    def omega1_measure(self) -> float:
        return self.omega1.measure()

    def fiber_measures(self) -> Dict[SIndex, float]:
        return {key: fiber.measure() for key, fiber in self.fibers.items()}

    def min_fiber_measure(self) -> float:
        measures = self.fiber_measures()
        return min(measures.values()) if measures else 0.0

    def omega_measure(self) -> float:
        """|Ω| = ∫ |fiber(s)| ds over Ω₁"""
        return sum(self.fiber_measures().values()) * self.omega1.geometry.voxel_volume

    def second_points(self, s: np.ndarray) -> np.ndarray:
        """x̄ - (s, |s|^2)"""
        return self.base_point.coords - _parabola(np.atleast_2d(s))

    def first_points(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        """x̄ - (s, |s|^2) + (t, |t|^2)"""
        return self.second_points(s) + _parabola(np.atleast_2d(t))

    def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Every stored (s, t) node pair as two (n, d-1) arrays"""
        m = self.dim - 1
        s_rows, t_rows = [], []
        for key, fiber in self.fibers.items():
            t = fiber.occupied_centers()
            if t.shape[0] == 0:
                continue
            s = self.omega1.geometry.centers(np.asarray(key)[None, :])
            s_rows.append(np.repeat(s, t.shape[0], axis=0))
            t_rows.append(t)
        if not s_rows:
            return np.zeros((0, m)), np.zeros((0, m))
        return np.vstack(s_rows), np.vstack(t_rows)

    def sample_pairs(self, seed: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """n stored (s, t) pairs drawn uniformly with replacement"""
        S, T = self.pairs()
        if S.shape[0] == 0:
            return S, T
        chosen = stream(seed).integers(0, S.shape[0], size=n)
        return S[chosen], T[chosen]

    def to_dict(self) -> dict:
        return {
            "base_point": self.base_point.coords.tolist(),
            "omega1": self.omega1.to_dict(),
            "fibers": [
                {"s_index": list(key), "fiber": fiber.to_dict()}
                for key, fiber in sorted(self.fibers.items())
            ],
            "alpha": self.alpha,
            "alpha_star": self.alpha_star,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "TowerData":
        return cls(
            base_point=SpacePoint(np.asarray(payload["base_point"], dtype=float)),
            omega1=GridSet.from_dict(payload["omega1"]),
            fibers={
                tuple(int(i) for i in entry["s_index"]): GridSet.from_dict(entry["fiber"])
                for entry in payload["fibers"]
            },
            alpha=float(payload["alpha"]),
            alpha_star=float(payload["alpha_star"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "TowerData":
        return cls.from_dict(json.loads(text))


def _fiber_rows(E: GridSet, second: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Membership of second_i + (t_j, |t_j|^2) in E as an (n_s, n_t) mask"""
    lifted = _parabola(t)
    return E.contains_many(second[:, None, :] + lifted[None, :, :])


def _tower_at(
    x_bar: np.ndarray,
    E: GridSet,
    pruned: GridSet,
    q: QuadratureSpec,
    alpha: float,
    alpha_star: float,
    kappa: float,
) -> TowerData:
    h = q.t_resolution
    m = E.dim - 1
    cell = h ** m

    s = t_nodes((x_bar, x_bar), pruned.bounding_box(), q)
    if s.shape[0] == 0:
        raise TowerFailed(f"no first-generation steps from {x_bar.tolist()}")
    # nodes are recomputed as voxel centers so stored towers reproduce them bit for bit
    s_geometry, s_index = _lattice_geometry(s, h)
    s = s_geometry.centers(s_index)
    second = x_bar - _parabola(s)
    hit = pruned.contains_many(second)
    s, s_index, second = s[hit], s_index[hit], second[hit]
    if s.shape[0] == 0:
        raise TowerFailed(f"no first-generation steps from {x_bar.tolist()}")

    t = t_nodes((second.min(axis=0), second.max(axis=0)), E.bounding_box(), q, transpose=True)
    if t.shape[0] == 0:
        raise TowerFailed("no return steps reach E")
    t_geometry, t_index = _lattice_geometry(t, h)
    t = t_geometry.centers(t_index)

    chunk = max(1, QUADRATURE_SETTINGS["max_chunk_points"] // t.shape[0])
    blocks = [second[i:i + chunk] for i in range(0, second.shape[0], chunk)]
    rows = map_bounded(lambda block: _fiber_rows(E, block, t), blocks, RUNTIME_SETTINGS["max_workers"])
    mask = np.vstack(rows)

    counts = mask.sum(axis=1)
    keep = counts * cell >= kappa * alpha_star
    if not keep.any():
        raise TowerFailed("every fiber fell below the second-generation threshold")
    s_index, mask, counts = s_index[keep], mask[keep], counts[keep]
    if s_index.shape[0] * cell < kappa * alpha:
        raise TowerFailed(
            f"|Ω₁| = {s_index.shape[0] * cell:.4g} below {kappa:g} α = {kappa * alpha:.4g}"
        )

    # equal fibers: keep the `target` nodes nearest each fiber's centroid
    target = int(counts.min())
    omega1 = np.zeros(s_geometry.shape, dtype=bool)
    omega1[tuple(s_index.T)] = True
    fibers: Dict[SIndex, GridSet] = {}
    for row, key in zip(mask, s_index):
        members = np.flatnonzero(row)
        centroid = t[members].mean(axis=0)
        distance = np.sum((t[members] - centroid) ** 2, axis=1)
        chosen = members[np.argsort(distance, kind="stable")[:target]]
        occupancy = np.zeros(t_geometry.shape, dtype=bool)
        occupancy[tuple(t_index[chosen].T)] = True
        fibers[tuple(int(i) for i in key)] = GridSet(t_geometry, occupancy)

    return TowerData(
        base_point=SpacePoint(x_bar),
        omega1=GridSet(s_geometry, omega1),
        fibers=fibers,
        alpha=alpha,
        alpha_star=alpha_star,
    )


def _superlevel(S: GridSet, other: GridSet, q: QuadratureSpec, threshold: float, transpose: bool) -> GridSet:
    """Voxels of S whose incidence count with `other` reaches threshold"""
    indices = S.occupied_indices()
    counts = evaluate_T(other, S.geometry.centers(indices), q, transpose=transpose)
    keep = counts >= threshold
    if not keep.any():
        raise TowerFailed(f"pruning emptied {'E★' if transpose else 'E'}")
    occupancy = np.zeros(S.shape, dtype=bool)
    occupancy[tuple(indices[keep].T)] = True
    return GridSet(S.geometry, occupancy)


def build_tower(
    E: GridSet,
    Estar: GridSet,
    q: QuadratureSpec,
    kappa: Optional[float] = None,
    attempts: int = 8,
) -> TowerData:
    """
    Two-step superlevel pruning. E★ is cut to the voxels whose transposed
    count reaches κα★; x̄ maximizes Tχ over the cut set (ties go to the
    lexicographically smallest voxel) and the next best base points are
    tried when the measure bounds fail at the first.
    """
    kappa = COMBINATORICS_SETTINGS["tower_kappa"] if kappa is None else kappa
    incidence = bilinear(E, Estar, q)
    if incidence <= 0:
        raise NoIncidences("the pair has no incidences at this resolution")
    alpha = incidence / E.measure()
    alpha_star = incidence / Estar.measure()

    pruned = _superlevel(Estar, E, q, kappa * alpha_star, transpose=True)

    centers = E.occupied_centers()
    values = evaluate_T(pruned, centers, q)
    order = np.argsort(-values, kind="stable")
    last_error: Optional[TowerFailed] = None
    for rank, i in enumerate(order[:attempts]):
        if values[i] < kappa * alpha:
            break
        try:
            tower = _tower_at(centers[i], E, pruned, q, alpha, alpha_star, kappa)
        except TowerFailed as e:
            logger.warning(f"Base point candidate {rank} rejected: {e.message}")
            last_error = e
            continue
        logger.info(
            f"Tower at x̄={np.round(centers[i], 6).tolist()}: |Ω₁|={tower.omega1_measure():.4g}, "
            f"fiber={tower.min_fiber_measure():.4g} (α={alpha:.4g}, α★={alpha_star:.4g})"
        )
        return tower

    message = last_error.message if last_error else "no base point reaches the α superlevel"
    logger.error(f"Tower construction failed: {message}")
    raise TowerFailed(message)


@dataclass(frozen=True, eq=False)
class ThreeStepTower:
    """
    A base point x̄★ of E★, its steps r with x̄★ + (r,|r|^2) in E (the set ω₁),
    and the two-step tower grown from x̄ = x̄★ + (r̄,|r̄|^2).
    """

    base_star: SpacePoint
    omega1: GridSet
    r_bar: np.ndarray
    tower: TowerData

    @property
    def dim(self) -> int:
        return self.base_star.dim

    @property
    def base_point(self) -> SpacePoint:
        return self.tower.base_point

    def omega1_measure(self) -> float:
        return self.omega1.measure()

    def first_steps(self) -> np.ndarray:
        return self.omega1.occupied_centers()

    def first_points(self, r: np.ndarray) -> np.ndarray:
        """x̄★ + (r, |r|^2)"""
        return self.base_star.coords + _parabola(np.atleast_2d(r))

    def to_dict(self) -> dict:
        return {
            "base_star": self.base_star.coords.tolist(),
            "omega1": self.omega1.to_dict(),
            "r_bar": self.r_bar.tolist(),
            "tower": self.tower.to_dict(),
        }


def build_three_step_tower(
    E: GridSet,
    Estar: GridSet,
    q: QuadratureSpec,
    kappa: Optional[float] = None,
    attempts: int = 8,
) -> ThreeStepTower:
    """
    Both sets are cut to their superlevels (E★ at κα★, then E at κα against
    the cut E★). x̄★ maximizes the transposed count over the cut E★, its steps
    into the cut E form ω₁, and r̄ is taken from ω₁ nearest its coordinatewise
    median, falling back to the next nearest while the two-step tower fails.
    """
    kappa = COMBINATORICS_SETTINGS["tower_kappa"] if kappa is None else kappa
    incidence = bilinear(E, Estar, q)
    if incidence <= 0:
        raise NoIncidences("the pair has no incidences at this resolution")
    alpha = incidence / E.measure()
    alpha_star = incidence / Estar.measure()
    h = q.t_resolution

    pruned_star = _superlevel(Estar, E, q, kappa * alpha_star, transpose=True)
    pruned = _superlevel(E, pruned_star, q, kappa * alpha, transpose=False)

    centers = pruned_star.occupied_centers()
    values = evaluate_T(pruned, centers, q, transpose=True)
    x_star = centers[int(np.argsort(-values, kind="stable")[0])]

    r = t_nodes((x_star, x_star), pruned.bounding_box(), q, transpose=True)
    if r.shape[0] == 0:
        raise TowerFailed(f"no steps from x̄★={x_star.tolist()} reach E")
    r_geometry, r_index = _lattice_geometry(r, h)
    r = r_geometry.centers(r_index)
    hit = pruned.contains_many(x_star + _parabola(r))
    r, r_index = r[hit], r_index[hit]
    if r.shape[0] * h ** (E.dim - 1) < kappa * alpha_star:
        raise TowerFailed(
            f"|ω₁| = {r.shape[0] * h ** (E.dim - 1):.4g} below {kappa:g} α★ = {kappa * alpha_star:.4g}"
        )
    occupancy = np.zeros(r_geometry.shape, dtype=bool)
    occupancy[tuple(r_index.T)] = True
    omega1 = GridSet(r_geometry, occupancy)

    distance = np.sum((r - np.median(r, axis=0)) ** 2, axis=1)
    last_error: Optional[TowerFailed] = None
    for rank, i in enumerate(np.argsort(distance, kind="stable")[:attempts]):
        x_bar = x_star + _parabola(r[i:i + 1])[0]
        try:
            tower = _tower_at(x_bar, E, pruned_star, q, alpha, alpha_star, kappa)
        except TowerFailed as e:
            logger.warning(f"Step candidate {rank} rejected: {e.message}")
            last_error = e
            continue
        logger.info(
            f"Three-step tower at x̄★={np.round(x_star, 6).tolist()}: |ω₁|={omega1.measure():.4g}, "
            f"|Ω₁|={tower.omega1_measure():.4g}, fiber={tower.min_fiber_measure():.4g}"
        )
        return ThreeStepTower(SpacePoint(x_star), omega1, r[i].copy(), tower)

    message = last_error.message if last_error else "no step candidates"
    logger.error(f"Three-step tower failed: {message}")
    raise TowerFailed(message)


class PhiImageReport(BaseModel):
    measure: float
    reference: float  # α★^{d/(d-1)} α^{1/(d-1)}
    ratio: float
    first_measure_ratio: Optional[float] = None  # 2|Φ| / |E|, at most about 1


def phi_image_measure(
    tower: TowerData,
    raster: Optional[RasterSpec] = None,
    e_measure: Optional[float] = None,
) -> PhiImageReport:
    """Measure of {(u, s·u) : s ∈ Ω₁, u + s in the fiber of s}"""
    d = tower.dim
    reference = tower.alpha_star ** (d / (d - 1)) * tower.alpha ** (1 / (d - 1))
    S, T = tower.pairs()
    if S.shape[0] == 0:
        return PhiImageReport(measure=0.0, reference=reference, ratio=0.0,
                              first_measure_ratio=0.0 if e_measure else None)

    spacing = tower.omega1.geometry.spacing
    measure = image_measure(S, T - S, spacing, spacing, raster)
    ratio = measure / reference if reference > 0 else math.inf
    return PhiImageReport(
        measure=measure,
        reference=reference,
        ratio=ratio,
        first_measure_ratio=2 * measure / e_measure if e_measure else None,
    )


def tower_summary(tower: TowerData) -> Dict[str, float]:
    """Measure bounds of a tower against its average incidence numbers"""
    return {
        "omega1_measure": tower.omega1_measure(),
        "min_fiber_measure": tower.min_fiber_measure(),
        "omega1_over_alpha": tower.omega1_measure() / tower.alpha,
        "fiber_over_alpha_star": tower.min_fiber_measure() / tower.alpha_star,
        "fibers": float(len(tower.fibers)),
    }


def check_inclusions(tower: TowerData, E: GridSet, Estar: GridSet, seed: int, n: int) -> List[bool]:
    """Membership of sampled chains: [all second points in E★, all first points in E]"""
    S, T = tower.sample_pairs(seed, n)
    if S.shape[0] == 0:
        return [True, True]
    return [
        bool(np.all(Estar.contains_many(tower.second_points(S)))),
        bool(np.all(E.contains_many(tower.first_points(S, T)))),
    ]
