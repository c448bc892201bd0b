"""Determinant moments of a measure on a balanced convex set.

Estimates ∫_{𝒞^n} |det(u_1 ... u_n)| dμ(u_1)...dμ(u_n) by Monte Carlo and
compares it with c δ^n λ^n |𝒞|. The mass hypothesis (every balanced convex
𝒞' of measure at most δ|𝒞| leaves mass λ outside it) is spot-checked over
slabs and the uniformly shrunk copy of 𝒞.
"""

import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.optimize import linprog

from .convexify import ConvexApprox, slab_contains
from .errors import DimensionUnsupported, EmptySet, HypothesisViolated
from ..config.settings import COMBINATORICS_SETTINGS, MONTE_CARLO_SETTINGS
from ..utils.logger import Logger
from ..utils.rng import shard_sizes, stream

logger = Logger(__name__)


class DetMomentReport(BaseModel):
    estimate: float
    stderr: float
    bound: float
    ok: bool
    hypothesis_ok: bool
    hypothesis_mass: float  # smallest μ(𝒞 ∖ 𝒞') over the tested family


def _bounding_box(approx: ConvexApprox) -> Tuple[np.ndarray, np.ndarray]:
    directions = approx.directions()
    widths = approx.widths()
    n = approx.dim
    A_ub = np.vstack([directions, -directions])
    b_ub = np.concatenate([widths, widths])
    lower, upper = np.zeros(n), np.zeros(n)
    for i in range(n):
        objective = np.zeros(n)
        objective[i] = 1.0
        for sign, out in ((1.0, lower), (-1.0, upper)):
            result = linprog(sign * objective, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * n)
            if result.status != 0:
                raise HypothesisViolated("the slab intersection is unbounded")
            out[i] = result.x[i]
    center = np.asarray(approx.center_offset)
    return center + lower, center + upper


def sample_convex(approx: ConvexApprox, seed: int, n: int) -> np.ndarray:
    """n uniform points of 𝒞 by rejection from its bounding box"""
    lower, upper = _bounding_box(approx)
    rng = stream(seed)
    chunks, have = [], 0
    while have < n:
        draws = lower + rng.random((2 * (n - have) + 64, approx.dim)) * (upper - lower)
        kept = draws[approx.contains(draws)]
        chunks.append(kept)
        have += kept.shape[0]
    return np.vstack(chunks)[:n]


def _fan(n: int, count: int, seed: int) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        angles = np.arange(count) * math.pi / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    raw = stream(seed).normal(size=(count, n))
    return np.vstack([np.eye(n), raw / np.linalg.norm(raw, axis=1, keepdims=True)])


def hypothesis_mass(
    points: np.ndarray,
    weights: np.ndarray,
    approx: ConvexApprox,
    delta: float,
    seed: int,
    samples: int = 20_000,
    directions: int = 16,
) -> float:
    """Smallest μ(𝒞 ∖ 𝒞') over slabs and the shrunk copy with |𝒞'| = δ|𝒞|"""
    center = np.asarray(approx.center_offset)
    shifted = points - center
    uniform = sample_convex(approx, seed, samples) - center
    fan = _fan(approx.dim, directions, seed)
    # a slab through the center holding a δ fraction of 𝒞
    widths = np.quantile(np.abs(uniform @ fan.T), delta, axis=0)
    outside = np.abs(shifted @ fan.T) >= widths
    masses = list(weights @ outside)
    shrunk = slab_contains(shifted, approx.directions(), approx.widths() * delta ** (1 / approx.dim))
    masses.append(float(weights @ ~shrunk))
    return float(min(masses))


def det_moment(
    points: np.ndarray,
    weights: np.ndarray,
    approx: ConvexApprox,
    delta: float,
    lambda_val: float,
    seed: int,
    m: int,
    constant: Optional[float] = None,
) -> DetMomentReport:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    n = points.shape[1]
    if n > 3:
        raise DimensionUnsupported(f"det_moment supports n <= 3, got n={n}")
    if n != approx.dim:
        raise ValueError("points and the convex set must share a dimension")
    if points.shape[0] == 0 or weights.sum() <= 0:
        raise EmptySet("det_moment needs a positive measure")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if not 0 < delta <= 1 or lambda_val < 0 or m < 1:
        raise ValueError("need 0 < delta <= 1, lambda_val >= 0 and m >= 1")
    constant = COMBINATORICS_SETTINGS["det_moment_constant"] if constant is None else constant

    if not np.all(approx.contains(points) | (weights == 0)):
        raise HypothesisViolated("μ is not supported in 𝒞")
    mass = float(weights.sum())
    probabilities = weights / mass

    samples = []
    for shard, size in enumerate(shard_sizes(m, MONTE_CARLO_SETTINGS["block_size"])):
        rng = stream(seed, shard)
        chosen = rng.choice(points.shape[0], size=(size, n), p=probabilities)
        samples.append(np.abs(np.linalg.det(points[chosen])))
    values = np.concatenate(samples) * mass ** n
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0

    observed = hypothesis_mass(points, weights, approx, delta, seed)
    hypothesis_ok = observed >= lambda_val
    if not hypothesis_ok:
        logger.warning(f"Mass hypothesis fails: μ(𝒞∖𝒞') = {observed:.4g} < λ = {lambda_val:.4g}")
    bound = constant * delta ** n * lambda_val ** n * approx.measure
    return DetMomentReport(
        estimate=estimate,
        stderr=stderr,
        bound=bound,
        ok=estimate >= bound,
        hypothesis_ok=hypothesis_ok,
        hypothesis_mass=observed,
    )
