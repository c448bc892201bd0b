"""Trilinear inequality check and the comparable-measures diagnostic."""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel

from .errors import EmptySet
from .grid import GridSet
from .transform import QuadratureSpec, bilinear, evaluate_T
from ..utils.logger import Logger

logger = Logger(__name__)


class TrilinearReport(BaseModel):
    lhs: float
    rhs: float
    ratio: float
    hypothesis_ok: bool
    witness: Optional[List[float]] = None
    witness_value: Optional[float] = None
    incidence: float = 0.0


class ComparableMeasuresReport(BaseModel):
    ratio: float  # |E'| / |E|
    eta: float
    exponent: float  # log(ratio) / log(1/eta), the empirical C in |E'| <= C eta^{-C} |E|


def trilinear_check(
    E: GridSet,
    Eprime: GridSet,
    G: GridSet,
    beta_prime: float,
    q: QuadratureSpec,
) -> TrilinearReport:
    """
    Checks T χ_E'(x) >= β' on every occupied voxel center of G, then returns
    lhs = (𝒯(E,G)/|E|)^{1/(d-1)} β'^{d/(d-1)} against rhs = |E'|.
    """
    for name, S in (("E", E), ("E'", Eprime), ("G", G)):
        if S.measure() <= 0:
            raise EmptySet(f"trilinear_check needs |{name}| > 0")
    if beta_prime < 0:
        raise ValueError("beta_prime must be nonnegative")

    d = E.dim
    centers = G.occupied_centers()
    values = evaluate_T(Eprime, centers, q)
    worst = int(np.argmin(values))
    hypothesis_ok = bool(values[worst] >= beta_prime)
    witness = None if hypothesis_ok else centers[worst].tolist()
    if not hypothesis_ok:
        logger.warning(f"Superlevel hypothesis fails at {witness}: {values[worst]:.4g} < {beta_prime:.4g}")

    incidence = bilinear(E, G, q)
    rhs = Eprime.measure()
    if beta_prime == 0:
        lhs = 0.0
    else:
        lhs = (incidence / E.measure()) ** (1 / (d - 1)) * beta_prime ** (d / (d - 1))
    return TrilinearReport(
        lhs=lhs,
        rhs=rhs,
        ratio=lhs / rhs,
        hypothesis_ok=hypothesis_ok,
        witness=witness,
        witness_value=None if hypothesis_ok else float(values[worst]),
        incidence=incidence,
    )


def comparable_measures_check(E: GridSet, Eprime: GridSet, eta: float) -> ComparableMeasuresReport:
    """Ratio |E'|/|E| and the exponent it implies for |E'| <= C η^{-C} |E|"""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if E.measure() <= 0:
        raise EmptySet("comparable_measures_check needs |E| > 0")
    ratio = Eprime.measure() / E.measure()
    exponent = float(np.log(max(ratio, 1.0)) / np.log(1 / eta))
    return ComparableMeasuresReport(ratio=ratio, eta=eta, exponent=exponent)
