"""Voxel Grid Module

Axis-aligned voxel representations of measurable subsets of R^d and of
nonnegative functions on them. Voxels are half-open boxes [lo, hi) per axis,
so membership is decidable and measures are exactly additive.
"""

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptySet, GridError
from ..utils.logger import Logger
from ..utils.rng import stream

logger = Logger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]

# Uniform samples stay this far from voxel faces so the floor in locate()
# always lands back in the sampled voxel.
_FACE_MARGIN = 1e-9


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SpacePoint:
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1).copy()
        if coords.size < 2:
            raise GridError(f"points live in R^d with d >= 2, got d={coords.size}")
        object.__setattr__(self, "coords", _frozen(coords))

    @property
    def dim(self) -> int:
        return self.coords.size

    @property
    def prime(self) -> np.ndarray:
        return self.coords[:-1]

    @property
    def last(self) -> float:
        return float(self.coords[-1])


@dataclass(frozen=True, eq=False)
class IncidencePoint:
    first: SpacePoint
    second: SpacePoint

    def __post_init__(self):
        if not isinstance(self.first, SpacePoint):
            object.__setattr__(self, "first", SpacePoint(self.first))
        if not isinstance(self.second, SpacePoint):
            object.__setattr__(self, "second", SpacePoint(self.second))
        if self.first.dim != self.second.dim:
            raise GridError("incidence point factors must share a dimension")

    @property
    def dim(self) -> int:
        return self.first.dim

    @property
    def residual(self) -> float:
        return float(incidence_residual(self.first.coords, self.second.coords))

    def is_incident(self, tolerance: float = 1e-12) -> bool:
        return abs(self.residual) <= tolerance

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.first.coords, self.second.coords


def incidence_residual(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x★_d - x_d + |x★' - x'|^2, vectorized over leading axes"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = y[..., :-1] - x[..., :-1]
    return y[..., -1] - x[..., -1] + np.sum(diff * diff, axis=-1)


def solve_second_last(x: np.ndarray, y_prime: np.ndarray) -> np.ndarray:
    """x★_d that puts (x, (x★', x★_d)) on the incidence manifold"""
    x = np.asarray(x, dtype=float)
    diff = np.asarray(y_prime, dtype=float) - x[..., :-1]
    return x[..., -1] - np.sum(diff * diff, axis=-1)


@dataclass(frozen=True, eq=False)
class GridGeometry:
    origin: np.ndarray
    spacing: np.ndarray
    shape: Tuple[int, ...]

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(-1).copy()
        spacing = np.asarray(self.spacing, dtype=float).reshape(-1).copy()
        shape = tuple(int(n) for n in self.shape)
        if spacing.size == 1 and origin.size > 1:
            spacing = np.full(origin.size, spacing[0])
        if not (origin.size == spacing.size == len(shape)) or origin.size == 0:
            raise GridError("origin, spacing and shape must have one entry per axis")
        if any(n <= 0 for n in shape):
            raise GridError(f"zero-size axis in shape {shape}")
        if not np.all(np.isfinite(origin)) or not np.all(np.isfinite(spacing)):
            raise GridError("origin and spacing must be finite")
        if np.any(spacing <= 0):
            raise GridError("spacing must be positive on every axis")
        object.__setattr__(self, "origin", _frozen(origin))
        object.__setattr__(self, "spacing", _frozen(spacing))
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_bounds(cls, lower: ArrayLike, upper: ArrayLike, spacing: ArrayLike) -> "GridGeometry":
        """Smallest grid with the given spacing starting at lower and reaching upper"""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        spacing = np.broadcast_to(np.asarray(spacing, dtype=float), lower.shape)
        counts = np.maximum(np.ceil((upper - lower) / spacing - 1e-9), 1).astype(int)
        return cls(lower, spacing, tuple(counts))

    @classmethod
    def from_voxels(cls, lower: ArrayLike, upper: ArrayLike, voxels: Union[int, Sequence[int]]) -> "GridGeometry":
        """Grid over [lower, upper) with a fixed voxel count per axis"""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        counts = np.broadcast_to(np.asarray(voxels, dtype=int), lower.shape)
        if np.any(upper <= lower):
            raise GridError("upper bounds must exceed lower bounds")
        return cls(lower, (upper - lower) / counts, tuple(int(c) for c in counts))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * np.asarray(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def centers(self, indices: np.ndarray) -> np.ndarray:
        return self.origin + (np.asarray(indices, dtype=float) + 0.5) * self.spacing

    def all_centers(self) -> np.ndarray:
        axes = [self.origin[i] + (np.arange(n) + 0.5) * self.spacing[i] for i, n in enumerate(self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Voxel indices of points and a mask of those inside the grid"""
        points = np.asarray(points, dtype=float)
        indices = np.floor((points - self.origin) / self.spacing).astype(np.int64)
        inside = np.all((indices >= 0) & (indices < np.asarray(self.shape)), axis=-1)
        return indices, inside

    def lookup(self, array: np.ndarray, points: np.ndarray, fill=0):
        """Values of a shape-matched array at points; fill outside the grid"""
        points = np.asarray(points, dtype=float)
        flat_points = points.reshape(-1, self.dim)
        indices, inside = self.locate(flat_points)
        out = np.full(flat_points.shape[0], fill, dtype=array.dtype)
        if np.any(inside):
            hits = indices[inside]
            out[inside] = array[tuple(hits.T)]
        return out.reshape(points.shape[:-1])

    def same_as(self, other: "GridGeometry") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.spacing, other.spacing)
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "origin": self.origin.tolist(),
            "spacing": self.spacing.tolist(),
            "shape": list(self.shape),
        }


def _rle_encode(flat: np.ndarray) -> list:
    """Alternating zero/one run counts, starting with zeros"""
    flat = flat.astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).astype(int).tolist()
    if flat[0]:
        runs = [0] + runs
    return runs


def _rle_decode(runs: Sequence[int], size: int) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64)
    if np.any(runs < 0):
        raise GridError("negative run length")
    values = np.zeros(runs.size, dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, runs)
    if flat.size != size:
        raise GridError(f"run lengths cover {flat.size} voxels, expected {size}")
    return flat


@dataclass(frozen=True, eq=False)
class GridSet:
    geometry: GridGeometry
    occupancy: np.ndarray

    def __post_init__(self):
        occupancy = np.asarray(self.occupancy, dtype=bool).copy()
        if occupancy.shape != self.geometry.shape:
            raise GridError(
                f"occupancy shape {occupancy.shape} does not match grid {self.geometry.shape}"
            )
        object.__setattr__(self, "occupancy", _frozen(occupancy))

    @classmethod
    def empty(cls, geometry: GridGeometry) -> "GridSet":
        return cls(geometry, np.zeros(geometry.shape, dtype=bool))

    @classmethod
    def full(cls, geometry: GridGeometry) -> "GridSet":
        return cls(geometry, np.ones(geometry.shape, dtype=bool))

    @classmethod
    def from_predicate(cls, geometry: GridGeometry, predicate: Callable[[np.ndarray], np.ndarray]) -> "GridSet":
        """Occupied iff the voxel center satisfies the vectorized predicate"""
        mask = np.asarray(predicate(geometry.all_centers()), dtype=bool)
        return cls(geometry, mask.reshape(geometry.shape))

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def origin(self) -> np.ndarray:
        return self.geometry.origin

    @property
    def spacing(self) -> np.ndarray:
        return self.geometry.spacing

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.geometry.shape

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    def measure(self) -> float:
        return self.count * self.geometry.voxel_volume

    def is_empty(self) -> bool:
        return self.count == 0

    def contains(self, point: Union[SpacePoint, ArrayLike]) -> bool:
        coords = point.coords if isinstance(point, SpacePoint) else np.asarray(point, dtype=float)
        if coords.shape != (self.dim,):
            raise GridError(f"point of length {coords.shape} in a {self.dim}-dimensional set")
        return bool(self.geometry.lookup(self.occupancy, coords[None, :], fill=False)[0])

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        return self.geometry.lookup(self.occupancy, points, fill=False)

    def occupied_indices(self) -> np.ndarray:
        return np.argwhere(self.occupancy)

    def occupied_centers(self) -> np.ndarray:
        return self.geometry.centers(self.occupied_indices())

    def bounding_box(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Lower and upper corners of the occupied voxels, None when empty"""
        indices = self.occupied_indices()
        if indices.size == 0:
            return None
        lower = self.origin + indices.min(axis=0) * self.spacing
        upper = self.origin + (indices.max(axis=0) + 1) * self.spacing
        return lower, upper

    def sample_uniform(self, seed: int, n: int) -> np.ndarray:
        """n points uniform on the occupied region, one row per point"""
        if n < 1:
            raise ValueError("n must be at least 1")
        indices = self.occupied_indices()
        if indices.size == 0:
            raise EmptySet("cannot sample from a set of measure zero")
        rng = stream(seed)
        chosen = indices[rng.integers(0, indices.shape[0], size=n)]
        offsets = _FACE_MARGIN + rng.random((n, self.dim)) * (1 - 2 * _FACE_MARGIN)
        return self.origin + (chosen + offsets) * self.spacing

    def restrict(self, predicate: Callable[[np.ndarray], np.ndarray]) -> "GridSet":
        """Keep occupied voxels whose centers satisfy the vectorized predicate"""
        indices = self.occupied_indices()
        occupancy = np.zeros(self.shape, dtype=bool)
        if indices.size:
            keep = np.asarray(predicate(self.geometry.centers(indices)), dtype=bool)
            occupancy[tuple(indices[keep].T)] = True
        return GridSet(self.geometry, occupancy)

    def union(self, other: "GridSet") -> "GridSet":
        self._require_same_grid(other)
        return GridSet(self.geometry, self.occupancy | other.occupancy)

    def intersection(self, other: "GridSet") -> "GridSet":
        self._require_same_grid(other)
        return GridSet(self.geometry, self.occupancy & other.occupancy)

    def permute_axes(self, order: Sequence[int]) -> "GridSet":
        order = list(order)
        geometry = GridGeometry(
            self.origin[order], self.spacing[order], tuple(self.shape[i] for i in order)
        )
        return GridSet(geometry, np.transpose(self.occupancy, order))

    def translate(self, shift: ArrayLike) -> "GridSet":
        geometry = GridGeometry(self.origin + np.asarray(shift, dtype=float), self.spacing, self.shape)
        return GridSet(geometry, self.occupancy)

    def indicator(self, value: float = 1.0) -> "GridFunction":
        return GridFunction(self.geometry, self.occupancy.astype(float) * value)

    def _require_same_grid(self, other: "GridSet"):
        if not self.geometry.same_as(other.geometry):
            raise GridError("set algebra needs identical grids")

    def to_dict(self) -> dict:
        payload = self.geometry.to_dict()
        payload["occupancy_rle"] = _rle_encode(self.occupancy.ravel(order="C"))
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "GridSet":
        try:
            geometry = GridGeometry(payload["origin"], payload["spacing"], payload["shape"])
            if int(payload.get("dim", geometry.dim)) != geometry.dim:
                raise GridError("dim does not match the geometry")
            flat = _rle_decode(payload["occupancy_rle"], geometry.size)
        except KeyError as e:
            logger.error(f"GridSet payload is missing field {e}")
            raise GridError(f"missing field {e}")
        except GridError as e:
            logger.error(f"Rejected GridSet payload: {e}")
            raise
        return cls(geometry, flat.reshape(geometry.shape))

    @classmethod
    def from_json(cls, text: str) -> "GridSet":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class GridFunction:
    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        if values.shape != self.geometry.shape:
            raise GridError(f"values shape {values.shape} does not match grid {self.geometry.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise GridError("grid functions must be finite and nonnegative")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "GridFunction":
        return cls(geometry, np.zeros(geometry.shape))

    @property
    def dim(self) -> int:
        return self.geometry.dim

    def support(self) -> GridSet:
        return GridSet(self.geometry, self.values > 0)

    def level_set(self, lower: float, upper: float) -> GridSet:
        """Voxels with lower <= value < upper"""
        return GridSet(self.geometry, (self.values >= lower) & (self.values < upper))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.geometry.lookup(self.values, points, fill=0.0)

    def lp_mass(self, p: float) -> float:
        return float(np.sum(self.values ** p) * self.geometry.voxel_volume)

    def scaled(self, factor: float) -> "GridFunction":
        return GridFunction(self.geometry, self.values * factor)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if not self.geometry.same_as(other.geometry):
            raise GridError("grid functions must share a grid to be added")
        return GridFunction(self.geometry, self.values + other.values)

    def to_dict(self) -> dict:
        payload = self.geometry.to_dict()
        payload["values"] = self.values.ravel(order="C").tolist()
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "GridFunction":
        try:
            geometry = GridGeometry(payload["origin"], payload["spacing"], payload["shape"])
        except KeyError as e:
            logger.error(f"GridFunction payload is missing field {e}")
            raise GridError(f"missing field {e}")
        values = np.asarray(payload["values"], dtype=float)
        if values.size != geometry.size:
            logger.error(f"Rejected GridFunction payload: {values.size} values for {geometry.size} voxels")
            raise GridError(f"{values.size} values for {geometry.size} voxels")
        return cls(geometry, values.reshape(geometry.shape))

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        return cls.from_dict(json.loads(text))


def load_grid_set(path: str) -> GridSet:
    with open(path) as handle:
        return GridSet.from_json(handle.read())


def load_grid_function(path: str) -> GridFunction:
    with open(path) as handle:
        return GridFunction.from_json(handle.read())
