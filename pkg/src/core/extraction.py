"""Extraction Module

Recovers a ball from a quasiextremal pair. A three-step tower supplies the
first steps ω₁ from x̄★, the base point x̄ = x̄★ + (r̄,|r̄|^2), the second
generation steps Ω₁ and their return fibers. Ω₁ is convexified about its
median s̄ and enclosed in a minimum-volume ellipsoid whose axes give the
frame. The primal radii come from the spread of r - r̄ and u = t - s along the
frame; ρ is then fixed so that the dual box 2^(d-1) ∏ r★ has the measure of
the convexified Ω₁, with r★ = ρ / r. Radii and slab grow together until the
ellipsoid fits the dual box and the parabolic residuals of the chains fit
the slab.
"""

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel

from .balls import envelope, make_ball
from .convexify import convexify
from .ellipsoid import mvee
from .errors import ExtractionFailed, NoIncidences, RadonToolkitError
from .grid import GridSet, IncidencePoint, SpacePoint
from .tower import build_three_step_tower
from .transform import QuadratureSpec, bilinear
from ..config.settings import COMBINATORICS_SETTINGS
from ..utils.logger import Logger

logger = Logger(__name__)


class ExtractionReport(BaseModel):
    first_measure_ratio: float  # |B_env| / |E|
    second_measure_ratio: float  # |B★_env| / |E★|
    retention: float  # 𝒯(E ∩ B_env, E★ ∩ B★_env) / 𝒯(E, E★)
    incidence: float
    rho: float
    slab_inflation: float  # λ with r, r★ scaled by λ and ρ by λ^2
    omega1_measure: float  # first steps r out of x̄★
    omega2_measure: float  # second steps s out of x̄
    convex_measure: float


def _fit_ball(E: GridSet, Estar: GridSet, q: QuadratureSpec, eta: float, quantile: float):
    three = build_three_step_tower(E, Estar, q)
    tower = three.tower
    approx = convexify(tower.omega1, eta, balanced=False)
    ellipsoid = mvee(approx.vertices())
    s_bar = np.asarray(approx.center_offset)
    r_bar = three.r_bar
    frame = ellipsoid.axes
    m = E.dim - 1

    S, T = tower.pairs()
    U = T - S
    R = three.first_steps() - r_bar
    steps = np.vstack([U, R])
    radii = np.quantile(np.abs(steps @ frame.T), quantile, axis=0) + 0.5 * q.t_resolution
    rho = float((approx.measure / 2 ** m * np.prod(radii)) ** (1 / m))
    if not rho > 0:
        raise ExtractionFailed("the steps carry no horizontal spread")
    dual = rho / radii

    residual = float(np.quantile(np.abs(np.concatenate([
        2 * np.sum(U * (S - s_bar), axis=1),
        2 * R @ (r_bar - s_bar),
    ])), quantile))
    # the dual box is centered at s̄, the ellipsoid at its own center
    reach = ellipsoid.semi_axes + np.abs((ellipsoid.center - s_bar) @ frame.T)
    needed = max(float(np.max(reach / dual)), math.sqrt(residual / rho))
    inflation = 1.0
    if needed >= 1:
        inflation = needed * (1 + 1e-9)
        radii, dual, rho = radii * inflation, dual * inflation, rho * inflation ** 2

    x_bar = tower.base_point.coords
    second = x_bar - np.append(s_bar, float(s_bar @ s_bar))
    ball = make_ball(IncidencePoint(SpacePoint(x_bar), SpacePoint(second)), frame, radii, rho / radii)
    measures = (three.omega1_measure(), tower.omega1_measure(), approx.measure)
    return ball, measures, inflation


def extract_ball(
    E: GridSet,
    Estar: GridSet,
    q: QuadratureSpec,
    eta: float = 0.5,
    quantile: Optional[float] = None,
):
    """(BallParams, ExtractionReport) for a pair with incidences"""
    quantile = COMBINATORICS_SETTINGS["capture_quantile"] if quantile is None else quantile
    try:
        ball, (omega1_measure, omega2_measure, convex_measure), inflation = _fit_ball(E, Estar, q, eta, quantile)
    except (ExtractionFailed, NoIncidences):
        raise
    except RadonToolkitError as e:
        logger.error(f"Ball extraction failed: {e}")
        raise ExtractionFailed(str(e))

    pair = envelope(ball)
    incidence = bilinear(E, Estar, q)
    kept = bilinear(E.restrict(pair.contains_first), Estar.restrict(pair.contains_second), q)
    report = ExtractionReport(
        first_measure_ratio=pair.measure_first / E.measure(),
        second_measure_ratio=pair.measure_second / Estar.measure(),
        retention=kept / incidence,
        incidence=incidence,
        rho=ball.rho,
        slab_inflation=inflation,
        omega1_measure=omega1_measure,
        omega2_measure=omega2_measure,
        convex_measure=convex_measure,
    )
    logger.info(
        f"Extracted ball rho={ball.rho:.4g}: |B|/|E|={report.first_measure_ratio:.3f}, "
        f"|B★|/|E★|={report.second_measure_ratio:.3f}, retention {report.retention:.3f}"
    )
    return ball, report
