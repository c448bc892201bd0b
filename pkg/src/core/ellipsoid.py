"""Minimum-volume enclosing ellipsoids of convex polytopes (Khachiyan iteration)."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ExtractionFailed
from ..config.settings import COMBINATORICS_SETTINGS
from ..utils.logger import Logger

logger = Logger(__name__)


@dataclass(frozen=True)
class Ellipsoid:
    """{c + Σ a_j z_j e_j : |z| <= 1} with the e_j the rows of axes"""
    center: np.ndarray
    axes: np.ndarray
    semi_axes: np.ndarray

    @property
    def shape_matrix(self) -> np.ndarray:
        """A with (x - c)ᵀ A^{-1} (x - c) <= 1"""
        return self.axes.T @ np.diag(self.semi_axes ** 2) @ self.axes

    def contains(self, points: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        local = (np.atleast_2d(points) - self.center) @ self.axes.T / self.semi_axes
        return np.sum(local * local, axis=1) <= 1 + slack

    def volume(self) -> float:
        n = self.center.size
        unit = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
        return unit * float(np.prod(self.semi_axes))


def _hull_vertices(points: np.ndarray) -> np.ndarray:
    try:
        hull = ConvexHull(points)
    except QhullError as e:
        raise ExtractionFailed(f"degenerate point cloud for the enclosing ellipsoid: {e}")
    return points[np.unique(hull.simplices)]


def mvee(points: np.ndarray, tol: Optional[float] = None, limits: Optional[int] = None) -> Ellipsoid:
    tol = COMBINATORICS_SETTINGS["mvee_tolerance"] if tol is None else tol
    limits = COMBINATORICS_SETTINGS["mvee_max_iterations"] if limits is None else limits
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]

    if n == 1:
        lo, hi = float(points.min()), float(points.max())
        if hi <= lo:
            raise ExtractionFailed("enclosing interval has zero length")
        return Ellipsoid(np.array([(lo + hi) / 2]), np.eye(1), np.array([(hi - lo) / 2]))

    P = _hull_vertices(points)
    N = P.shape[0]
    if N <= n:
        raise ExtractionFailed("the number of hull vertices must exceed the dimension")
    Q = np.vstack((P.T, np.ones(N)))
    u = np.ones(N) / N
    err = tol + 1.0
    iterations = 0
    while err > tol and iterations < limits:
        X_inv = np.linalg.inv(np.einsum("ij,j,kj", Q, u, Q))
        M = np.einsum("ji,jk,ki->i", Q, X_inv, Q)
        j = int(np.argmax(M))
        step = (1.0 - n / (M[j] - 1.0)) / (n + 1)
        updated = (1.0 - step) * u
        updated[j] += step
        err = float(np.linalg.norm(updated - u))
        u = updated
        iterations += 1
    if err > tol:
        logger.warning(f"Ellipsoid iteration stopped after {iterations} steps at error {err:.3e}")

    center = u @ P
    A = (np.einsum("ji,j,jk", P, u, P) - np.outer(center, center)) * n
    eigenvalues, eigenvectors = np.linalg.eigh(A)
    if eigenvalues.min() <= 0:
        raise ExtractionFailed("enclosing ellipsoid is degenerate")
    # Khachiyan's ellipsoid is tight only up to the tolerance; inflate to cover every vertex
    local = (P - center) @ eigenvectors / np.sqrt(eigenvalues)
    inflation = max(1.0, float(np.sqrt(np.max(np.sum(local * local, axis=1)))))
    return Ellipsoid(center, eigenvectors.T, np.sqrt(eigenvalues) * inflation)
