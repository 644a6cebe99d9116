"""Model geometries: circle, flat torus, round sphere.

Each geometry carries its curvature data (the Ricci quadratic form and the
lower bound K), a quadrature grid whose weights sum to the total volume
exactly, and enough structure for the analytic heat kernels in
:mod:`heatmetric.heat`. The sphere is represented by a one-dimensional
colatitude grid: every operation on it here reduces an azimuthally symmetric
or first-azimuthal-mode problem to that grid, so no 2-D mesh is ever built.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryError",
    "TruncationError",
    "CircleGeometry",
    "TorusGeometry",
    "SphereGeometry",
    "model_sphere",
    "legendre_table",
    "legendre_table_with_derivative",
]


class GeometryError(ValueError):
    """Invalid model-geometry parameters."""


class TruncationError(GeometryError):
    """Spectral truncation too small for the requested evaluation."""


def legendre_table(l_max, x):
    """Legendre polynomials P_0..P_{l_max} at points x, via the three-term
    recurrence. Returns an array of shape (l_max + 1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    P = np.zeros((l_max + 1,) + x.shape)
    P[0] = 1.0
    if l_max >= 1:
        P[1] = x
    for l in range(1, l_max):
        P[l + 1] = ((2 * l + 1) * x * P[l] - l * P[l - 1]) / (l + 1)
    return P


def legendre_table_with_derivative(l_max, x):
    """P_l(x) and dP_l/dx, using (1 - x^2) P_l' = l (P_{l-1} - x P_l).

    Valid for |x| < 1; the colatitude grids used here are cell-centered and
    never touch the poles.
    """
    x = np.asarray(x, dtype=float)
    P = legendre_table(l_max, x)
    dP = np.zeros_like(P)
    one = 1.0 - x**2
    for l in range(1, l_max + 1):
        dP[l] = l * (P[l - 1] - x * P[l]) / one
    return P, dP


@dataclass(frozen=True)
class CircleGeometry:
    """Circle of circumference L, discretized by n equispaced nodes."""

    L: float
    n: int

    @property
    def K(self) -> float:
        return 0.0

    @property
    def h(self) -> float:
        return self.L / self.n

    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def faces(self) -> np.ndarray:
        """Midpoints between consecutive nodes (periodic)."""
        return self.nodes() + 0.5 * self.h

    def volume_weights(self) -> np.ndarray:
        return np.full(self.n, self.h)

    def total_volume(self) -> float:
        return self.L

    def ricci(self, x, v) -> float:
        """Ric(v, v); identically zero on the flat circle."""
        return 0.0


@dataclass(frozen=True)
class TorusGeometry:
    """Flat torus [0, L1) x [0, L2), discretized by an n1 x n2 grid."""

    L1: float
    L2: float
    n1: int
    n2: int

    @property
    def K(self) -> float:
        return 0.0

    @property
    def h(self):
        return (self.L1 / self.n1, self.L2 / self.n2)

    def nodes(self):
        h1, h2 = self.h
        return np.arange(self.n1) * h1, np.arange(self.n2) * h2

    def volume_weights(self) -> np.ndarray:
        h1, h2 = self.h
        return np.full((self.n1, self.n2), h1 * h2)

    def total_volume(self) -> float:
        return self.L1 * self.L2

    def ricci(self, x, v) -> float:
        return 0.0


@dataclass(frozen=True)
class SphereGeometry:
    """Round 2-sphere of radius r, reduced to a colatitude grid.

    The grid is cell-centered: theta_i = (i + 1/2) * pi / n_theta, with cell
    faces at multiples of pi / n_theta. Quadrature weights are the exact
    spherical zone areas 2 pi r^2 (cos(theta_left) - cos(theta_right)), which
    agree with 2 pi r^2 sin(theta) dtheta to second order and telescope to
    the exact total area 4 pi r^2.
    """

    r: float
    n_theta: int
    l_max: int

    @property
    def K(self) -> float:
        return 1.0 / self.r**2

    @property
    def h(self) -> float:
        return np.pi / self.n_theta

    def nodes(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.h

    def faces(self) -> np.ndarray:
        return np.arange(self.n_theta + 1) * self.h

    def volume_weights(self) -> np.ndarray:
        cf = np.cos(self.faces())
        return 2.0 * np.pi * self.r**2 * (cf[:-1] - cf[1:])

    def total_volume(self) -> float:
        return 4.0 * np.pi * self.r**2

    def ricci(self, x, v) -> float:
        """Ric(v, v) = |v|^2 / r^2 (classical (n-1)/r^2 with n = 2)."""
        v = np.asarray(v, dtype=float)
        return float(np.dot(v.ravel(), v.ravel())) / self.r**2

    def check_truncation(self, t_min: float):
        """Kernel series convergence guard: l_max (l_max + 1) t >= 25."""
        if self.l_max * (self.l_max + 1) * t_min < 25.0:
            raise TruncationError(
                f"l_max={self.l_max} too small for t={t_min}: "
                "kernel series not converged (need l_max(l_max+1)t >= 25)"
            )


def model_sphere(r, n_theta, l_max) -> SphereGeometry:
    """Sphere geometry of radius r with an n_theta colatitude grid.

    Requires n_theta >= 64 and l_max >= 40; evaluations at small times
    additionally require l_max (l_max + 1) t >= 25 and raise
    TruncationError otherwise.
    """
    if r <= 0:
        raise GeometryError("radius must be > 0")
    n_theta, l_max = int(n_theta), int(l_max)
    if n_theta < 64:
        raise GeometryError("sphere grid needs n_theta >= 64")
    if l_max < 40:
        raise GeometryError("sphere series needs l_max >= 40")
    return SphereGeometry(r=float(r), n_theta=n_theta, l_max=l_max)
