"""Covering Module

Covers a ball by sub-balls whose envelopes are a δ fraction of the parent's.
The ball is first sent to the unit ball at the origin; the net there is
η-fine in x' and x★' and η'-fine in the sheared height s = x_d - |x'|^2,
with η = δ^{1/(d+1)} and η' = c'η². Sub-balls map back by the inverse word.
"""

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy.stats import linregress

from .balls import BallParams, envelope, make_ball
from .errors import DeltaOutOfRange
from .grid import IncidencePoint, SpacePoint
from .symmetries import SymmetryElement, apply_ball, inverse, normalizing_element
from ..config.settings import BALL_SETTINGS
from ..utils.logger import Logger
from ..utils.rng import stream

logger = Logger(__name__)


def _midpoints(lower: float, upper: float, count: int) -> np.ndarray:
    step = (upper - lower) / count
    return lower + (np.arange(count) + 0.5) * step


@dataclass(frozen=True, eq=False)
class BallCover:
    parent: BallParams
    delta: float
    eta: float
    to_parent: SymmetryElement
    x_nodes: np.ndarray  # 1-d node axis for x' coordinates
    y_nodes: np.ndarray
    s_nodes: np.ndarray
    trivial: bool = False

    @property
    def dim(self) -> int:
        return self.parent.dim

    def __len__(self) -> int:
        if self.trivial:
            return 1
        m = self.dim - 1
        return self.x_nodes.size ** m * self.y_nodes.size ** m * self.s_nodes.size

    def normalized_centers(self):
        """Sub-ball centers (X, Y) in the unit-ball frame"""
        m = self.dim - 1
        grids = np.meshgrid(*([self.x_nodes] * m + [self.y_nodes] * m + [self.s_nodes]), indexing="ij")
        flat = np.stack([g.ravel() for g in grids], axis=-1)
        x_prime, y_prime, s = flat[:, :m], flat[:, m:2 * m], flat[:, -1]
        X = np.column_stack([x_prime, s + np.sum(x_prime ** 2, axis=1)])
        Y = np.column_stack([y_prime, X[:, -1] - np.sum((y_prime - x_prime) ** 2, axis=1)])
        return X, Y

    def balls(self) -> Iterator[BallParams]:
        if self.trivial:
            yield self.parent
            return
        X, Y = self.normalized_centers()
        m = self.dim - 1
        radii = np.full(m, self.eta)
        for x, y in zip(X, Y):
            sub = make_ball(IncidencePoint(SpacePoint(x), SpacePoint(y)), np.eye(m), radii, radii)
            yield apply_ball(self.to_parent, sub)

    def covers_normalized(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """
        For points of the unit ball, whether the sub-ball picked by rounding
        each net coordinate contains them; misses fall back to a full scan.
        """
        if self.trivial:
            return np.ones(X.shape[0], dtype=bool)
        m = self.dim - 1
        eta_sq = self.eta ** 2
        xj = self.x_nodes[_nearest(self.x_nodes, X[:, :-1])]
        yj = self.y_nodes[_nearest(self.y_nodes, Y[:, :-1])]
        a = X[:, :-1] - xj
        s = X[:, -1] - np.sum(X[:, :-1] ** 2, axis=1)
        sj = self.s_nodes[_nearest(self.s_nodes, s + 2 * np.sum(a * yj, axis=1))]
        covered = _sub_ball_contains(X, Y, xj, yj, sj, self.eta, eta_sq)
        missing = np.flatnonzero(~covered)
        if missing.size:
            CX, CY = self.normalized_centers()
            cs = CX[:, -1] - np.sum(CX[:, :-1] ** 2, axis=1)
            for i in missing:
                hit = _sub_ball_contains(
                    np.broadcast_to(X[i], CX.shape), np.broadcast_to(Y[i], CY.shape),
                    CX[:, :-1], CY[:, :-1], cs, self.eta, eta_sq,
                )
                covered[i] = bool(hit.any())
        return covered


def _nearest(nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Index of the nearest node on a uniform midpoint axis"""
    step = nodes[1] - nodes[0] if nodes.size > 1 else 1.0
    index = np.rint((values - nodes[0]) / step).astype(np.int64)
    return np.clip(index, 0, nodes.size - 1)


def _sub_ball_contains(X, Y, xj, yj, sj, eta, eta_sq):
    """Membership in axis-aligned sub-balls with radii η and ρ = η²"""
    xj_d = sj + np.sum(xj ** 2, axis=-1)
    yj_d = xj_d - np.sum((yj - xj) ** 2, axis=-1)
    first_box = np.all(np.abs(X[..., :-1] - xj) < eta, axis=-1)
    second_box = np.all(np.abs(Y[..., :-1] - yj) < eta, axis=-1)
    first_slab = np.abs(X[..., -1] - yj_d - np.sum((X[..., :-1] - yj) ** 2, axis=-1)) < eta_sq
    second_slab = np.abs(Y[..., -1] - xj_d + np.sum((Y[..., :-1] - xj) ** 2, axis=-1)) < eta_sq
    return first_box & second_box & first_slab & second_slab


def horizontal_constant(dim: int, slab_constant: float) -> float:
    """Largest horizontal net step (in units of η) that keeps both slab residuals below η²"""
    return min(1.0, math.sqrt(max(1.9 - slab_constant, 0.1) / (dim - 1)))


def cover(b: BallParams, delta: float, slab_constant: Optional[float] = None) -> BallCover:
    if not 0 < delta <= 1:
        raise DeltaOutOfRange(f"delta={delta} must lie in (0, 1]")
    slab_constant = BALL_SETTINGS["cover_slab_constant"] if slab_constant is None else slab_constant
    if not 0 < slab_constant < 1.9:
        raise DeltaOutOfRange(f"slab constant {slab_constant} must lie in (0, 1.9)")
    to_parent = inverse(normalizing_element(b))
    d = b.dim
    if delta == 1:
        empty = np.zeros(0)
        return BallCover(b, 1.0, 1.0, to_parent, empty, empty, empty, trivial=True)

    eta = delta ** (1 / (d + 1))
    kappa = horizontal_constant(d, slab_constant)
    n_horizontal = math.ceil(2 / (kappa * eta))
    margin = (d - 1) * kappa * eta
    n_slab = math.ceil((2 + 2 * margin) / (slab_constant * eta * eta))
    nodes = _midpoints(-1.0, 1.0, n_horizontal)
    result = BallCover(
        parent=b,
        delta=delta,
        eta=eta,
        to_parent=to_parent,
        x_nodes=nodes,
        y_nodes=nodes,
        s_nodes=_midpoints(-1 - margin, 1 + margin, n_slab),
    )
    logger.info(f"Cover at delta={delta:g}: eta={eta:.4f}, {len(result)} sub-balls")
    return result


def sample_unit_ball(dim: int, n: int, seed: int):
    """Uniform samples of the unit ball in the (x', x_d, x★') parametrization"""
    rng = stream(seed)
    m = dim - 1
    chunks_x, chunks_y, have = [], [], 0
    while have < n:
        size = 2 * (n - have) + 16
        x_prime = rng.uniform(-1, 1, (size, m))
        y_prime = rng.uniform(-1, 1, (size, m))
        s = rng.uniform(-1, 1, size)
        keep = np.abs(s + 2 * np.sum(x_prime * y_prime, axis=1)) < 1
        x_prime, y_prime, s = x_prime[keep], y_prime[keep], s[keep]
        X = np.column_stack([x_prime, s + np.sum(x_prime ** 2, axis=1)])
        Y = np.column_stack([y_prime, X[:, -1] - np.sum((y_prime - x_prime) ** 2, axis=1)])
        chunks_x.append(X)
        chunks_y.append(Y)
        have += X.shape[0]
    return np.vstack(chunks_x)[:n], np.vstack(chunks_y)[:n]


def coverage_fraction(result: BallCover, seed: int, n: int) -> float:
    """
    Fraction of sampled points of the parent ball lying in some sub-ball.
    Sampling happens in the unit frame; the normalizing word preserves the
    parametrized measure up to a constant.
    """
    X, Y = sample_unit_ball(result.dim, n, seed)
    return float(np.mean(result.covers_normalized(X, Y)))


def envelope_ratio(result: BallCover, count: int = 3) -> List[float]:
    """Sub-ball over parent envelope measure for the first few emitted balls"""
    parent = envelope(result.parent).measure_first
    ratios = []
    for i, ball in enumerate(result.balls()):
        if i >= count:
            break
        ratios.append(envelope(ball).measure_first / parent)
    return ratios


class CoverFit(BaseModel):
    exponent: float  # A in |J| <= C δ^{-A}
    intercept: float
    r_squared: float
    counts: List[int]
    deltas: List[float]


def cover_exponent(b: BallParams, deltas: Sequence[float], slab_constant: Optional[float] = None) -> CoverFit:
    counts = [len(cover(b, d, slab_constant)) for d in deltas]
    fit = linregress(np.log(deltas), np.log(counts))
    return CoverFit(
        exponent=float(-fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue ** 2),
        counts=counts,
        deltas=list(deltas),
    )
