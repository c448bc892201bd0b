"""Symmetry Module

Incidence-preserving maps of R^d x R^d. Every generator carries the exact
pair of maps (g, g★) acting on the two factors; elements are words of
generators applied left to right.
"""

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .balls import BallParams, make_ball
from .errors import BasisNotOrthonormal, GridError, MisalignedLinearAction, NonInvertible, OffManifold
from .grid import GridGeometry, GridSet, IncidencePoint, SpacePoint, incidence_residual, solve_second_last
from ..config.settings import SYMMETRY_SETTINGS
from ..utils.logger import Logger
from ..utils.rng import stream

logger = Logger(__name__)

GENERATOR_KINDS = ("translation", "shear", "rotation", "parabolic_dilation", "sheared_linear")


@dataclass(frozen=True, eq=False)
class Generator:
    kind: str
    parameter: np.ndarray
    dim: int

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise GridError(f"unknown generator kind {self.kind!r}")
        m = self.dim - 1
        parameter = np.array(self.parameter, dtype=float)
        if self.kind == "translation":
            parameter = parameter.reshape(self.dim)
        elif self.kind == "shear":
            parameter = parameter.reshape(m)
        elif self.kind == "parabolic_dilation":
            parameter = parameter.reshape(())
            if not parameter > 0 or not np.isfinite(parameter):
                raise NonInvertible(f"dilation factor {float(parameter)} must be positive")
        else:
            parameter = parameter.reshape(m, m)
            if self.kind == "rotation":
                if np.max(np.abs(parameter @ parameter.T - np.eye(m))) > SYMMETRY_SETTINGS["residual_tolerance"]:
                    raise BasisNotOrthonormal("rotation matrix is not orthogonal")
            elif not np.all(np.isfinite(parameter)) or np.linalg.cond(parameter) > SYMMETRY_SETTINGS["conditioning_threshold"]:
                raise NonInvertible("sheared_linear matrix is singular beyond the conditioning threshold")
        parameter.setflags(write=False)
        object.__setattr__(self, "parameter", parameter)

    def map_first(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = X.copy()
        p = self.parameter
        if self.kind == "translation":
            out += p
        elif self.kind == "shear":
            out[:, :-1] = X[:, :-1] + p
            out[:, -1] = X[:, -1] + 2 * X[:, :-1] @ p + p @ p
        elif self.kind == "rotation":
            out[:, :-1] = X[:, :-1] @ p.T
        elif self.kind == "parabolic_dilation":
            out[:, :-1] *= p
            out[:, -1] *= p * p
        else:
            image = X[:, :-1] @ p.T
            out[:, :-1] = image
            out[:, -1] = X[:, -1] - np.sum(X[:, :-1] ** 2, axis=1) + np.sum(image ** 2, axis=1)
        return out

    def map_second(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = Y.copy()
        p = self.parameter
        if self.kind == "translation":
            out += p
        elif self.kind == "shear":
            out[:, -1] = Y[:, -1] + 2 * Y[:, :-1] @ p
        elif self.kind == "rotation":
            out[:, :-1] = Y[:, :-1] @ p.T
        elif self.kind == "parabolic_dilation":
            out[:, :-1] *= p
            out[:, -1] *= p * p
        else:
            # y' -> A^{-T} y'
            image = np.linalg.solve(p.T, Y[:, :-1].T).T
            out[:, :-1] = image
            out[:, -1] = Y[:, -1] + np.sum(Y[:, :-1] ** 2, axis=1) - np.sum(image ** 2, axis=1)
        return out

    def inverse(self) -> "Generator":
        p = self.parameter
        if self.kind in ("translation", "shear"):
            return Generator(self.kind, -p, self.dim)
        if self.kind == "rotation":
            return Generator(self.kind, p.T, self.dim)
        if self.kind == "parabolic_dilation":
            return Generator(self.kind, 1.0 / p, self.dim)
        return Generator(self.kind, np.linalg.inv(p), self.dim)

    def measure_factors(self) -> Tuple[float, float]:
        if self.kind == "parabolic_dilation":
            factor = float(self.parameter) ** (self.dim + 1)
            return factor, factor
        if self.kind == "sheared_linear":
            det = abs(float(np.linalg.det(self.parameter)))
            return det, 1.0 / det
        return 1.0, 1.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameter": np.asarray(self.parameter).tolist()}


@dataclass(frozen=True, eq=False)
class SymmetryElement:
    """A word of generators; generators[0] acts first"""
    generators: Tuple[Generator, ...]
    dim: int

    @classmethod
    def identity(cls, dim: int) -> "SymmetryElement":
        return cls((), dim)

    @classmethod
    def single(cls, kind: str, parameter, dim: int) -> "SymmetryElement":
        return cls((Generator(kind, parameter, dim),), dim)

    @classmethod
    def translation(cls, v: Sequence[float]) -> "SymmetryElement":
        v = np.asarray(v, dtype=float)
        return cls.single("translation", v, v.size)

    @classmethod
    def shear(cls, delta: Sequence[float]) -> "SymmetryElement":
        delta = np.asarray(delta, dtype=float).reshape(-1)
        return cls.single("shear", delta, delta.size + 1)

    @classmethod
    def rotation(cls, R) -> "SymmetryElement":
        R = np.atleast_2d(np.asarray(R, dtype=float))
        return cls.single("rotation", R, R.shape[0] + 1)

    @classmethod
    def parabolic_dilation(cls, lam: float, dim: int) -> "SymmetryElement":
        return cls.single("parabolic_dilation", lam, dim)

    @classmethod
    def sheared_linear(cls, A) -> "SymmetryElement":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls.single("sheared_linear", A, A.shape[0] + 1)

    def map_first(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        for generator in self.generators:
            X = generator.map_first(X)
        return X

    def map_second(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        for generator in self.generators:
            Y = generator.map_second(Y)
        return Y

    def measure_factors(self) -> Tuple[float, float]:
        first, second = 1.0, 1.0
        for generator in self.generators:
            a, b = generator.measure_factors()
            first *= a
            second *= b
        return first, second

    def to_json(self) -> str:
        return json.dumps([g.to_dict() for g in self.generators])

    @classmethod
    def from_records(cls, records: List[dict], dim: int) -> "SymmetryElement":
        try:
            generators = tuple(Generator(r["kind"], r["parameter"], dim) for r in records)
        except KeyError as e:
            raise GridError(f"generator record missing {e}")
        return cls(generators, dim)

    @classmethod
    def from_json(cls, text: str, dim: int) -> "SymmetryElement":
        return cls.from_records(json.loads(text), dim)


def compose(g: SymmetryElement, h: SymmetryElement) -> SymmetryElement:
    """g after h"""
    if g.dim != h.dim:
        raise GridError("cannot compose elements of different dimensions")
    return SymmetryElement(h.generators + g.generators, g.dim)


def inverse(g: SymmetryElement) -> SymmetryElement:
    return SymmetryElement(tuple(gen.inverse() for gen in reversed(g.generators)), g.dim)


def _residual_tolerance(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return SYMMETRY_SETTINGS["residual_tolerance"] * np.maximum(1.0, np.abs(X[:, -1]))


def apply_points(g: SymmetryElement, X: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return g.map_first(X), g.map_second(Y)


def apply_pair(g: SymmetryElement, z: IncidencePoint) -> IncidencePoint:
    x, y = z.as_arrays()
    X, Y = x[None, :], y[None, :]
    if abs(z.residual) > _residual_tolerance(X, Y)[0]:
        raise OffManifold(f"input residual {z.residual:.3g}")
    X2, Y2 = apply_points(g, X, Y)
    return IncidencePoint(SpacePoint(X2[0]), SpacePoint(Y2[0]))


def _apply_generator_ball(generator: Generator, b: BallParams) -> BallParams:
    x, y = b.center.as_arrays()
    new_x = generator.map_first(x)[0]
    new_y = generator.map_second(y)[0]
    new_y[-1] = solve_second_last(new_x, new_y[:-1])
    basis, radii, dual = b.basis, b.radii, b.dual_radii
    p = generator.parameter

    if generator.kind == "rotation":
        basis = basis @ p.T
    elif generator.kind == "parabolic_dilation":
        radii = radii * float(p)
        dual = dual * float(p)
    elif generator.kind == "sheared_linear":
        gram = basis @ (p.T @ p) @ basis.T
        diagonal = np.diag(gram)
        off = gram - np.diag(diagonal)
        if np.max(np.abs(off)) > 1e-9 * np.max(diagonal):
            raise MisalignedLinearAction("A^T A is not diagonal in the ball's frame")
        sigma = np.sqrt(diagonal)
        images = (basis @ p.T) / sigma[:, None]
        # polar factor removes rounding drift from orthonormality
        u, _, vt = np.linalg.svd(images)
        basis = u @ vt
        radii = radii * sigma
        dual = dual / sigma
    return make_ball(IncidencePoint(SpacePoint(new_x), SpacePoint(new_y)), basis, radii, dual)


def apply_ball(g: SymmetryElement, b: BallParams) -> BallParams:
    for generator in g.generators:
        b = _apply_generator_ball(generator, b)
    return b


def normalizing_element(b: BallParams) -> SymmetryElement:
    """Word sending b to the unit ball centered at the origin"""
    d = b.dim
    x, y = b.center.as_arrays()
    w = y[:-1] - x[:-1]
    scale = 1.0 / np.sqrt(b.rho)
    steps = [
        SymmetryElement.translation(-x),
        SymmetryElement.shear(w),
        SymmetryElement.translation(np.append(-w, -(w @ w))),
        SymmetryElement.rotation(b.basis),
        SymmetryElement.parabolic_dilation(scale, d),
        SymmetryElement.sheared_linear(np.diag(1.0 / (b.radii * scale))),
    ]
    element = SymmetryElement.identity(d)
    for step in steps:
        element = compose(step, element)
    return element


class InvarianceReport(BaseModel):
    samples: int
    max_residual: float
    residual_ok: bool
    declared_first: float
    declared_second: float
    jacobian_first: float
    jacobian_second: float
    scaling_ok: bool


def _numerical_jacobian(func, points: np.ndarray, step: float) -> np.ndarray:
    """Central-difference Jacobian determinants, exact for quadratic maps"""
    n, d = points.shape
    dets = np.empty(n)
    for i in range(n):
        columns = []
        for k in range(d):
            offset = np.zeros(d)
            offset[k] = step
            forward = func(points[i] + offset)[0]
            backward = func(points[i] - offset)[0]
            columns.append((forward - backward) / (2 * step))
        dets[i] = abs(np.linalg.det(np.stack(columns, axis=1)))
    return dets


def sample_manifold(dim: int, samples: int, seed: int, box: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """On-manifold points parametrized by (x, x★') in a centered box"""
    box = SYMMETRY_SETTINGS["sample_box"] if box is None else box
    rng = stream(seed)
    X = rng.uniform(-box, box, size=(samples, dim))
    Y = np.empty_like(X)
    Y[:, :-1] = rng.uniform(-box, box, size=(samples, dim - 1))
    Y[:, -1] = solve_second_last(X, Y[:, :-1])
    return X, Y


def check_invariance(g: SymmetryElement, samples: int, seed: int) -> InvarianceReport:
    X, Y = sample_manifold(g.dim, samples, seed)
    X2, Y2 = apply_points(g, X, Y)
    residuals = np.abs(incidence_residual(X2, Y2))
    max_residual = float(residuals.max()) if residuals.size else 0.0

    anchors = stream(seed, 1).uniform(-1, 1, size=(8, g.dim))
    step = SYMMETRY_SETTINGS["jacobian_step"]
    jac_first = float(np.median(_numerical_jacobian(g.map_first, anchors, step)))
    jac_second = float(np.median(_numerical_jacobian(g.map_second, anchors, step)))
    declared_first, declared_second = g.measure_factors()
    scaling_ok = bool(
        np.isclose(jac_first, declared_first, rtol=1e-5)
        and np.isclose(jac_second, declared_second, rtol=1e-5)
    )
    return InvarianceReport(
        samples=samples,
        max_residual=max_residual,
        residual_ok=max_residual <= SYMMETRY_SETTINGS["residual_tolerance"] * 10,
        declared_first=declared_first,
        declared_second=declared_second,
        jacobian_first=jac_first,
        jacobian_second=jac_second,
        scaling_ok=scaling_ok,
    )


def to_sheared(X: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """τ = x_d - |x'|^2 and τ★ = x★_d + |x★'|^2"""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    return X[:, -1] - np.sum(X[:, :-1] ** 2, axis=1), Y[:, -1] + np.sum(Y[:, :-1] ** 2, axis=1)


def conjugated_residual(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """τ★ - τ - 2 x'·x★', zero exactly on the manifold"""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    tau, tau_star = to_sheared(X, Y)
    return tau_star - tau - 2 * np.sum(X[:, :-1] * Y[:, :-1], axis=1)


def random_generator(kind: str, dim: int, rng: np.random.Generator) -> Generator:
    m = dim - 1
    if kind == "translation":
        return Generator(kind, rng.uniform(-1, 1, dim), dim)
    if kind == "shear":
        return Generator(kind, rng.uniform(-1, 1, m), dim)
    if kind == "rotation":
        q, r = np.linalg.qr(rng.normal(size=(m, m)))
        return Generator(kind, q * np.sign(np.diag(r)), dim)
    if kind == "parabolic_dilation":
        return Generator(kind, float(np.exp(rng.uniform(-0.7, 0.7))), dim)
    return Generator(kind, np.eye(m) + 0.3 * rng.uniform(-1, 1, (m, m)), dim)


def random_word(dim: int, length: int, seed: int, kinds: Sequence[str] = GENERATOR_KINDS) -> SymmetryElement:
    rng = stream(seed)
    chosen = [kinds[int(i)] for i in rng.integers(0, len(kinds), size=length)]
    return SymmetryElement(tuple(random_generator(kind, dim, rng) for kind in chosen), dim)


def transform_set(S: GridSet, g: SymmetryElement, factor: str = "first") -> GridSet:
    """
    Re-rasterizes g(S) (or g★(S)) on a grid with the same voxel counts as S.
    A voxel is occupied when the preimage of its center lies in S.
    """
    if factor not in ("first", "second"):
        raise ValueError(f"unknown factor {factor!r}")
    forward = g.map_first if factor == "first" else g.map_second
    g_inv = inverse(g)
    backward = g_inv.map_first if factor == "first" else g_inv.map_second
    box = S.bounding_box()
    if box is None:
        return S

    lower, upper = box
    corners = np.array(np.meshgrid(*[(lo, hi) for lo, hi in zip(lower, upper)], indexing="ij")).reshape(S.dim, -1).T
    images = forward(np.vstack([corners, S.occupied_centers()]))
    lo, hi = images.min(axis=0), images.max(axis=0)
    pad = (hi - lo) / np.asarray(S.shape)
    geometry = GridGeometry.from_voxels(lo - pad, hi + pad, np.asarray(S.shape) + 2)
    return GridSet.from_predicate(geometry, lambda pts: S.contains_many(backward(pts)))
