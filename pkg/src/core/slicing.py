"""Slicing Module

Measure of the image of Φ(s, u) = (u, s·u) over a rasterized domain, and the
slicing lower bound
    |Φ(ω)| >= c |det A|^{-1} ∫_ω |Au| du ds
for ω whose s-marginal lies in A(unit ball).

For a fixed u-cell the image of an s-voxel box is the interval spanned by
s·u over the box, so each u-cell contributes the length of a union of
intervals. The union is exact; the optional raster snaps it to v-cells.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from .errors import HypothesisViolated, NonInvertible, RasterOverflow
from .grid import GridSet
from ..utils.logger import Logger

logger = Logger(__name__)


class RasterSpec(BaseModel):
    v_resolution: float = Field(gt=0)
    bound: float = Field(gt=0)  # the image must lie in [-bound, bound]^d


class SlicingReport(BaseModel):
    lhs: float
    rhs: float
    ratio: Optional[float] = None


def _union_lengths(groups: np.ndarray, lo: np.ndarray, hi: np.ndarray, n_groups: int) -> np.ndarray:
    """Total length of the union of [lo, hi) intervals per group"""
    lengths = np.zeros(n_groups)
    if groups.size == 0:
        return lengths
    order = np.lexsort((lo, groups))
    groups, lo, hi = groups[order], lo[order], hi[order]
    starts = np.flatnonzero(np.r_[True, np.diff(groups) != 0])
    ends = np.r_[starts[1:], groups.size]
    for start, end in zip(starts, ends):
        seg_lo, seg_hi = lo[start:end], hi[start:end]
        reach = np.maximum.accumulate(seg_hi)
        previous = np.r_[-np.inf, reach[:-1]]
        lengths[groups[start]] = float(np.sum(np.maximum(0.0, seg_hi - np.maximum(seg_lo, previous))))
    return lengths


def image_measure(
    S: np.ndarray,
    U: np.ndarray,
    s_spacing: np.ndarray,
    u_spacing: np.ndarray,
    raster: Optional[RasterSpec] = None,
) -> float:
    """
    |{(u, s·u)}| over the union of s-voxel boxes centered at S paired with
    u-cells centered at U (one row per pair).
    """
    S = np.asarray(S, dtype=float)
    U = np.asarray(U, dtype=float)
    if S.shape[0] == 0:
        return 0.0
    s_spacing = np.broadcast_to(np.asarray(s_spacing, dtype=float), (S.shape[1],))
    u_spacing = np.broadcast_to(np.asarray(u_spacing, dtype=float), (U.shape[1],))

    low = (S - s_spacing / 2) * U
    high = (S + s_spacing / 2) * U
    lo = np.sum(np.minimum(low, high), axis=1)
    hi = np.sum(np.maximum(low, high), axis=1)

    keys = np.rint((U - U.min(axis=0)) / u_spacing).astype(np.int64)
    _, groups = np.unique(keys, axis=0, return_inverse=True)
    groups = np.asarray(groups).reshape(-1)
    n_groups = int(groups.max()) + 1
    cell = float(np.prod(u_spacing))

    if raster is None:
        return float(_union_lengths(groups, lo, hi, n_groups).sum() * cell)

    reach = max(float(np.max(np.abs(U) + u_spacing / 2)), float(np.max(np.abs(lo))), float(np.max(np.abs(hi))))
    if reach > raster.bound:
        logger.error(f"Image reaches {reach:.4g}, outside the raster bound {raster.bound:g}")
        raise RasterOverflow(f"image reaches {reach:.4g} > bound {raster.bound:g}")
    dv = raster.v_resolution
    # v-cells [k dv, (k+1) dv) whose centers fall inside an interval
    k_lo = np.ceil(lo / dv - 0.5)
    k_hi = np.floor(hi / dv - 0.5) + 1
    filled = k_hi > k_lo
    counts = _union_lengths(groups[filled], k_lo[filled], k_hi[filled], n_groups)
    return float(counts.sum() * dv * cell)


def slicing_bound(
    omega: GridSet,
    A: np.ndarray,
    raster: Optional[RasterSpec] = None,
) -> SlicingReport:
    """
    lhs = |Φ(ω)|, rhs = |det A|^{-1} Σ_ω |A u| (Riemann sum over voxel centers).
    The first d-1 axes of ω carry s, the last d-1 carry u.
    """
    if omega.dim % 2:
        raise ValueError("omega must live in R^{2(d-1)}")
    m = omega.dim // 2
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != (m, m):
        raise ValueError(f"A must be {m}x{m}")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12):
        raise ValueError("A must be symmetric")
    determinant = float(np.linalg.det(A))
    if abs(determinant) < 1e-300 or np.linalg.cond(A) > 1e12:
        raise NonInvertible("A is singular")

    centers = omega.occupied_centers()
    if centers.shape[0] == 0:
        return SlicingReport(lhs=0.0, rhs=0.0)
    S, U = centers[:, :m], centers[:, m:]
    preimage = np.linalg.solve(A, S.T).T
    outside = np.sum(preimage * preimage, axis=1) >= 1
    if np.any(outside):
        witness = S[np.argmax(outside)].tolist()
        logger.error(f"s-marginal leaves A(unit ball) at {witness}")
        raise HypothesisViolated(f"s = {witness} lies outside A(unit ball)")

    spacing = omega.spacing
    lhs = image_measure(S, U, spacing[:m], spacing[m:], raster)
    weights = np.linalg.norm(U @ A.T, axis=1)
    rhs = float(weights.sum() * omega.geometry.voxel_volume / abs(determinant))
    return SlicingReport(lhs=lhs, rhs=rhs, ratio=lhs / rhs if rhs > 0 else None)
