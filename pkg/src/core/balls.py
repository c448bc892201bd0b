"""Ball Module

The parametrized ball family on the incidence manifold: a center
z̄ = (x̄, x̄★), an orthonormal frame e, box radii r and r★ with r_j r★_j = ρ,
and two parabolic slab conditions of thickness ρ. Each ball is the
intersection of the manifold with a product of envelope sets whose measures
have closed forms.
"""

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BasisNotOrthonormal, DualityViolated, GridError, NotInShrunkSet, OffManifold
from .grid import GridGeometry, GridSet, IncidencePoint, SpacePoint, incidence_residual
from .transform import QuadratureSpec, ScorePair, score
from ..config.settings import BALL_SETTINGS, GRID_SETTINGS
from ..utils.logger import Logger
from ..utils.rng import stream

logger = Logger(__name__)


def manifold_tolerance(x: np.ndarray, y: np.ndarray, base: float) -> float:
    """Absolute residual tolerance scaled to the size of the terms involved"""
    scale = max(1.0, abs(float(x[-1])), abs(float(y[-1])), float(np.sum((y[:-1] - x[:-1]) ** 2)))
    return base * scale


@dataclass(frozen=True, eq=False)
class BallParams:
    center: IncidencePoint
    basis: np.ndarray  # rows are e_1 ... e_{d-1}
    radii: np.ndarray
    dual_radii: np.ndarray
    rho: float

    @property
    def dim(self) -> int:
        return self.center.dim

    @property
    def center_x(self) -> np.ndarray:
        return self.center.first.coords

    @property
    def center_xstar(self) -> np.ndarray:
        return self.center.second.coords

    def to_dict(self) -> dict:
        return {
            "center_x": self.center_x.tolist(),
            "center_xstar": self.center_xstar.tolist(),
            "basis": self.basis.ravel(order="C").tolist(),
            "r": self.radii.tolist(),
            "r_star": self.dual_radii.tolist(),
            "rho": float(self.rho),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "BallParams":
        try:
            x = np.asarray(payload["center_x"], dtype=float)
            m = x.size - 1
            basis = np.asarray(payload["basis"], dtype=float).reshape(m, m)
            ball = make_ball(IncidencePoint(x, payload["center_xstar"]), basis, payload["r"], payload["r_star"])
        except KeyError as e:
            raise GridError(f"missing ball field {e}")
        if "rho" in payload and not np.isclose(ball.rho, float(payload["rho"]), rtol=BALL_SETTINGS["duality_tolerance"] * 10):
            raise DualityViolated(f"stored rho {payload['rho']} disagrees with r_1 r★_1 = {ball.rho}")
        return ball

    @classmethod
    def from_json(cls, text: str) -> "BallParams":
        return cls.from_dict(json.loads(text))


def make_ball(
    center: Union[IncidencePoint, Tuple[Sequence[float], Sequence[float]]],
    basis: Sequence[Sequence[float]],
    r: Sequence[float],
    r_star: Sequence[float],
) -> BallParams:
    if not isinstance(center, IncidencePoint):
        center = IncidencePoint(SpacePoint(center[0]), SpacePoint(center[1]))
    m = center.dim - 1
    basis = np.array(basis, dtype=float).reshape(-1, m) if np.size(basis) else np.zeros((0, m))
    radii = np.array(r, dtype=float).reshape(-1)
    dual = np.array(r_star, dtype=float).reshape(-1)
    if basis.shape != (m, m) or radii.size != m or dual.size != m:
        raise GridError(f"basis and radii must describe R^{m}")
    if np.any(radii <= 0) or np.any(dual <= 0) or not np.all(np.isfinite(radii * dual)):
        raise DualityViolated("radii must be positive and finite")

    rho = float(radii[0] * dual[0])
    products = radii * dual
    if np.any(np.abs(products - rho) > BALL_SETTINGS["duality_tolerance"] * rho):
        raise DualityViolated(f"r_j r★_j = {products.tolist()} is not constant")

    gram = basis @ basis.T
    if np.max(np.abs(gram - np.eye(m))) > BALL_SETTINGS["orthonormal_tolerance"]:
        raise BasisNotOrthonormal("basis Gram matrix differs from the identity")

    x, y = center.as_arrays()
    residual = abs(center.residual)
    if residual > manifold_tolerance(x, y, BALL_SETTINGS["manifold_tolerance"]):
        raise OffManifold(f"center residual {residual:.3g}")

    basis.setflags(write=False)
    radii.setflags(write=False)
    dual.setflags(write=False)
    return BallParams(center=center, basis=basis, radii=radii, dual_radii=dual, rho=rho)


def unit_ball(dim: int) -> BallParams:
    zero = np.zeros(dim)
    ones = np.ones(dim - 1)
    return make_ball((zero, zero), np.eye(dim - 1), ones, ones)


def ball_membership_many(
    b: BallParams,
    X: np.ndarray,
    Y: np.ndarray,
    tolerance: Optional[float] = None,
) -> np.ndarray:
    tolerance = BALL_SETTINGS["membership_tolerance"] if tolerance is None else tolerance
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    xbar, ybar = b.center_x, b.center_xstar
    on_manifold = np.abs(incidence_residual(X, Y)) <= tolerance * np.maximum(1.0, np.abs(X[:, -1]))
    first_box = np.all(np.abs((X[:, :-1] - xbar[:-1]) @ b.basis.T) < b.radii, axis=1)
    second_box = np.all(np.abs((Y[:, :-1] - ybar[:-1]) @ b.basis.T) < b.dual_radii, axis=1)
    first_slab = np.abs(X[:, -1] - ybar[-1] - np.sum((X[:, :-1] - ybar[:-1]) ** 2, axis=1)) < b.rho
    second_slab = np.abs(Y[:, -1] - xbar[-1] + np.sum((Y[:, :-1] - xbar[:-1]) ** 2, axis=1)) < b.rho
    return on_manifold & first_box & second_box & first_slab & second_slab


def ball_membership(b: BallParams, z: IncidencePoint, tolerance: Optional[float] = None) -> bool:
    if z.dim != b.dim:
        raise GridError("point and ball dimensions differ")
    x, y = z.as_arrays()
    return bool(ball_membership_many(b, x[None, :], y[None, :], tolerance)[0])


@dataclass(frozen=True, eq=False)
class EnvelopePair:
    ball: BallParams

    @property
    def measure_first(self) -> float:
        return float(2 ** self.ball.dim * self.ball.rho * np.prod(self.ball.radii))

    @property
    def measure_second(self) -> float:
        return float(2 ** self.ball.dim * self.ball.rho * np.prod(self.ball.dual_radii))

    def contains_first(self, points: np.ndarray, shrink: float = 1.0) -> np.ndarray:
        b = self.ball
        points = np.atleast_2d(points)
        xbar, ybar = b.center_x, b.center_xstar
        box = np.all(np.abs((points[:, :-1] - xbar[:-1]) @ b.basis.T) < shrink * b.radii, axis=1)
        slab = np.abs(points[:, -1] - ybar[-1] - np.sum((points[:, :-1] - ybar[:-1]) ** 2, axis=1))
        return box & (slab < shrink * b.rho)

    def contains_second(self, points: np.ndarray, shrink: float = 1.0) -> np.ndarray:
        b = self.ball
        points = np.atleast_2d(points)
        xbar, ybar = b.center_x, b.center_xstar
        box = np.all(np.abs((points[:, :-1] - ybar[:-1]) @ b.basis.T) < shrink * b.dual_radii, axis=1)
        slab = np.abs(points[:, -1] - xbar[-1] + np.sum((points[:, :-1] - xbar[:-1]) ** 2, axis=1))
        return box & (slab < shrink * b.rho)

    def bounds_first(self) -> Tuple[np.ndarray, np.ndarray]:
        b = self.ball
        return _envelope_bounds(b.center_x, b.center_xstar, b.basis, b.radii, b.rho, sign=1.0)

    def bounds_second(self) -> Tuple[np.ndarray, np.ndarray]:
        b = self.ball
        return _envelope_bounds(b.center_xstar, b.center_x, b.basis, b.dual_radii, b.rho, sign=-1.0)


def _envelope_bounds(own, other, basis, radii, rho, sign):
    """
    Axis-aligned box around one envelope factor. The last coordinate is
    other_d + sign |x' - other'|^2 within ±ρ.
    """
    half = np.abs(basis).T @ radii
    circumradius = float(np.sqrt(np.sum(radii ** 2)))
    offset = float(np.linalg.norm(own[:-1] - other[:-1]))
    near = max(0.0, offset - circumradius) ** 2
    far = (offset + circumradius) ** 2
    if sign > 0:
        last = (other[-1] + near - rho, other[-1] + far + rho)
    else:
        last = (other[-1] - far - rho, other[-1] - near + rho)
    lower = np.append(own[:-1] - half, last[0])
    upper = np.append(own[:-1] + half, last[1])
    return lower, upper


def envelope(b: BallParams) -> EnvelopePair:
    return EnvelopePair(b)


def default_voxels(dim: int) -> int:
    return GRID_SETTINGS["voxels_per_axis"].get(dim, 16)


def rasterize_envelope(
    pair: EnvelopePair,
    factor: str = "first",
    voxels: Optional[int] = None,
    shrink: float = 1.0,
) -> GridSet:
    """
    Voxel-center rasterization on a grid relative to the envelope's own
    bounding box, so parabolic dilations map grids onto grids.
    """
    voxels = voxels or default_voxels(pair.ball.dim)
    if factor == "first":
        lower, upper = pair.bounds_first()
        predicate = lambda pts: pair.contains_first(pts, shrink)
    elif factor == "second":
        lower, upper = pair.bounds_second()
        predicate = lambda pts: pair.contains_second(pts, shrink)
    else:
        raise ValueError(f"unknown envelope factor {factor!r}")
    pad = (upper - lower) / voxels
    geometry = GridGeometry.from_voxels(lower - pad, upper + pad, voxels + 2)
    return GridSet.from_predicate(geometry, predicate)


def rasterize_pair(b: BallParams, voxels: Optional[int] = None) -> Tuple[GridSet, GridSet]:
    pair = envelope(b)
    return rasterize_envelope(pair, "first", voxels), rasterize_envelope(pair, "second", voxels)


def relative_quadrature(Estar: GridSet, q: Optional[QuadratureSpec] = None) -> QuadratureSpec:
    """Quadrature whose t-step is the finest horizontal spacing of E★"""
    step = float(np.min(Estar.spacing[:-1]))
    if q is None:
        return QuadratureSpec(t_resolution=step)
    return q


def isotropic_frame(b: BallParams) -> BallParams:
    """
    Image of b under the translation, shear and frame-diagonal sheared-linear
    symmetries that move both centers to the origin and set every r_j and
    r★_j to √ρ. Basis and ρ are kept. The incidence functional and the
    product |E||E★| are unchanged by these maps.
    """
    d = b.dim
    zero = np.zeros(d)
    side = np.full(d - 1, np.sqrt(b.rho))
    return make_ball((zero, zero), b.basis, side, side)


def verify_quasiextremal(
    b: BallParams,
    q: Optional[QuadratureSpec] = None,
    voxels: Optional[int] = None,
) -> ScorePair:
    """
    Score of the rasterized envelope pair; epsilon is the empirical c₀ candidate.

    Rasterization happens in the isotropic frame. An axis-aligned voxel
    grid resolves a slab of thickness ρ over a box of half-width r only to
    within about (r/r★)/voxels of ρ, so elongated balls would otherwise carry
    a staircase error. Measures are mapped back with the closed-form
    Jacobian ∏r_j / ρ^{(d-1)/2}.
    """
    frame = isotropic_frame(b)
    E, Estar = rasterize_pair(frame, voxels)
    iso = score(E, Estar, relative_quadrature(Estar, q))
    jacobian = float(np.prod(b.radii) / b.rho ** ((b.dim - 1) / 2))
    measure_first = iso.measure_first * jacobian
    measure_second = iso.measure_second / jacobian
    result = ScorePair(
        incidence=iso.incidence,
        alpha=iso.incidence / measure_first,
        alpha_star=iso.incidence / measure_second,
        epsilon=iso.epsilon,
        measure_first=measure_first,
        measure_second=measure_second,
    )
    logger.debug(f"Ball rho={b.rho:.4g} scored epsilon={result.epsilon:.4f}")
    return result


def in_shrunk_envelope(b: BallParams, eps: float, x: np.ndarray) -> bool:
    return bool(EnvelopePair(b).contains_first(np.asarray(x, dtype=float)[None, :], shrink=eps)[0])


def shrunk_slice_measure(
    b: BallParams,
    eps: float,
    x: Union[SpacePoint, Sequence[float]],
    q: Optional[QuadratureSpec] = None,
) -> float:
    """
    Measure of the y' with (x, (y', x_d - |y' - x'|^2)) in the ball, for x in
    the ε-shrunk envelope E_ε. Nodes are midpoints of the r★-box in the frame e.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    x = x.coords if isinstance(x, SpacePoint) else np.asarray(x, dtype=float)
    if not in_shrunk_envelope(b, eps, x):
        raise NotInShrunkSet(f"point {x.tolist()} is outside E_eps for eps={eps:g}")

    if q is None:
        counts = np.full(b.dim - 1, BALL_SETTINGS["slice_nodes_per_axis"])
    else:
        counts = np.maximum(np.ceil(2 * b.dual_radii / q.t_resolution), 1).astype(int)
    steps = 2 * b.dual_radii / counts
    axes = [(-b.dual_radii[j] + (np.arange(counts[j]) + 0.5) * steps[j]) for j in range(b.dim - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    coefficients = np.stack([m.ravel() for m in mesh], axis=-1)

    Y = np.empty((coefficients.shape[0], b.dim))
    Y[:, :-1] = b.center_xstar[:-1] + coefficients @ b.basis
    Y[:, -1] = x[-1] - np.sum((Y[:, :-1] - x[:-1]) ** 2, axis=1)
    X = np.broadcast_to(x, Y.shape)
    inside = ball_membership_many(b, X, Y)
    return float(np.count_nonzero(inside) * np.prod(steps))


def sample_shrunk_envelope(b: BallParams, eps: float, seed: int, n: int) -> np.ndarray:
    """n points of the ε-shrunk first envelope E_ε, uniform in the frame coordinates"""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    rng = stream(seed)
    m = b.dim - 1
    # stay strictly inside the open conditions
    coefficients = rng.uniform(-1, 1, (n, m)) * (0.999 * eps * b.radii)
    x_prime = b.center_x[:-1] + coefficients @ b.basis
    ybar = b.center_xstar
    height = ybar[-1] + np.sum((x_prime - ybar[:-1]) ** 2, axis=1)
    x_last = height + rng.uniform(-1, 1, n) * (0.999 * eps * b.rho)
    return np.column_stack([x_prime, x_last])
