"""Reference filters from contour quadrature.

The unit-circle contour integral of the resolvent is discretized with an
m-point Gauss-Legendre rule per quadrant; symmetry of the rule makes the
four quadrant images reproduce the full-circle quadrature sum, which gives
the classic baseline filter and the usual initial condition for the design
pipeline.
"""

from __future__ import annotations

import math

import numpy as np

from .filters import RationalFilter


def gauss_legendre_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the m-point Gauss-Legendre rule on [-1, 1]."""
    if m < 1:
        raise ValueError("m must be >= 1")
    nodes, weights = np.polynomial.legendre.leggauss(m)
    return nodes, weights


def gauss_legendre_filter(m: int, gap: float = 0.95) -> RationalFilter:
    """Contour-quadrature filter with m poles per quadrant.

    Quadrant angles are theta_i = (pi/4)(1 + t_i) for Gauss-Legendre nodes
    t_i, poles z_i = exp(i theta_i) on the unit circle, and coefficients
    beta_i = -w_i z_i / 8 so the four symmetric pole images sum to the
    full-circle quadrature of (1/2 pi i) * contour integral of dz/(z - x).
    The sign and branch conventions are certified against a trapezoidal
    discretization of the same contour integral in the test suite.
    """
    nodes, weights = gauss_legendre_nodes(m)
    theta = (math.pi / 4.0) * (1.0 + nodes)
    z = np.exp(1j * theta)
    beta = -weights * z / 8.0
    f = RationalFilter(beta=beta, z=z, gap=gap, scaled=False)
    f.validate()
    return f


def trapezoid_contour_filter(x, n_points: int = 10**6) -> np.ndarray:
    """Trapezoidal discretization of the unit-circle contour integral.

    Reference oracle for the quadrature filters: with enough points this
    converges (geometrically, for x off the circle) to the exact integral,
    i.e. the indicator of (-1, 1).  Returns the real part at each x.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = 2.0 * math.pi * np.arange(n_points) / n_points
    e = np.exp(1j * theta)
    out = np.empty(x.shape, dtype=float)
    for i, xi in enumerate(x):
        out[i] = np.mean(e / (e - xi)).real
    return out
