"""Lorentz norms through dyadic level sets, and the flatness-gain experiment."""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, Field

from .errors import FlatnessViolated
from .grid import GridFunction
from .transform import QuadratureSpec, evaluate_T
from ..config.settings import GRID_SETTINGS
from ..utils.logger import Logger

logger = Logger(__name__)


class LorentzSpec(BaseModel):
    p: float = Field(gt=1)
    r: float = Field(gt=0)  # math.inf gives the weak norm


@dataclass
class LevelDecomposition:
    """Measures |E_k| of E_k = {2^k <= f < 2^(k+1)} keyed by k"""
    levels: Dict[int, float] = field(default_factory=dict)
    dropped_voxels: int = 0
    dropped_mass: float = 0.0


def dyadic_levels(f: GridFunction, k_min: Optional[int] = None) -> LevelDecomposition:
    k_min = GRID_SETTINGS["lorentz_k_min"] if k_min is None else k_min
    values = f.values[f.values > 0]
    decomposition = LevelDecomposition()
    if values.size == 0:
        return decomposition

    exponents = np.floor(np.log2(values)).astype(np.int64)
    dropped = exponents < k_min
    if np.any(dropped):
        decomposition.dropped_voxels = int(np.count_nonzero(dropped))
        decomposition.dropped_mass = float(values[dropped].sum() * f.geometry.voxel_volume)
        logger.warning(
            f"Dropped {decomposition.dropped_voxels} voxels below 2^{k_min} "
            f"(L1 mass {decomposition.dropped_mass:.3e})"
        )
    kept, counts = np.unique(exponents[~dropped], return_counts=True)
    volume = f.geometry.voxel_volume
    decomposition.levels = {int(k): float(c * volume) for k, c in zip(kept, counts)}
    return decomposition


def lorentz_norm(f: GridFunction, spec: LorentzSpec, k_min: Optional[int] = None) -> float:
    """(Σ_k (2^k |E_k|^{1/p})^r)^{1/r}; sup over k when r is infinite"""
    levels = dyadic_levels(f, k_min).levels
    if not levels:
        return 0.0
    terms = np.array([2.0 ** k * measure ** (1 / spec.p) for k, measure in levels.items()])
    if math.isinf(spec.r):
        return float(terms.max())
    return float(np.sum(terms ** spec.r) ** (1 / spec.r))


def lp_norm(f: GridFunction, p: float) -> float:
    return f.lp_mass(p) ** (1 / p)


class FlatnessReport(BaseModel):
    ratio: float
    pairing: float
    norm_f: float
    norm_fstar: float
    eta: float
    flatness: float  # max_k 2^k |F_k|^{d/(d+1)} / ||f★||


def flatness(fstar: GridFunction) -> float:
    """Smallest η for which f★ passes the flatness hypothesis"""
    p = (fstar.dim + 1) / fstar.dim
    norm = lp_norm(fstar, p)
    levels = dyadic_levels(fstar).levels
    if norm == 0 or not levels:
        return 0.0
    return max(2.0 ** k * measure ** (1 / p) for k, measure in levels.items()) / norm


def flatness_gain(
    f: GridFunction,
    fstar: GridFunction,
    eta: float,
    q: QuadratureSpec,
) -> FlatnessReport:
    """⟨Tf, f★⟩ / (||f||_p ||f★||_p) with p = (d+1)/d for η-flat f★"""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    p = (fstar.dim + 1) / fstar.dim
    norm_fstar = lp_norm(fstar, p)
    norm_f = lp_norm(f, p)
    if norm_fstar == 0:
        return FlatnessReport(ratio=0.0, pairing=0.0, norm_f=norm_f, norm_fstar=0.0, eta=eta, flatness=0.0)

    achieved = flatness(fstar)
    if achieved > eta * (1 + 1e-9):
        raise FlatnessViolated(f"f★ is only {achieved:.4g}-flat, above eta={eta:g}")

    support = fstar.support()
    indices = support.occupied_indices()
    weights = fstar.values[tuple(indices.T)]
    transformed = evaluate_T(f, support.geometry.centers(indices), q)
    pairing = float(np.dot(transformed, weights) * fstar.geometry.voxel_volume)
    ratio = pairing / (norm_f * norm_fstar) if norm_f > 0 else 0.0
    return FlatnessReport(
        ratio=ratio,
        pairing=pairing,
        norm_f=norm_f,
        norm_fstar=norm_fstar,
        eta=eta,
        flatness=achieved,
    )
