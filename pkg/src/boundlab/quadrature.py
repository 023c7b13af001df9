"""Conical-product Gauss rules on the reference triangle and tetrahedron.

With four points per direction the rules integrate polynomials of total
degree 7 exactly, one above the degree-6 contract the assembly relies on.
All weights are positive, which the discrete Holder arguments depend on.
"""

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = ["triangle_rule", "tetrahedron_rule"]


def _jacobi01(k, alpha):
    # nodes/weights for weight (1-x)^alpha on [0, 1]
    x, w = roots_jacobi(k, alpha, 0.0)
    return (x + 1.0) / 2.0, w * 0.5 ** (alpha + 1)


def _legendre01(k):
    x, w = roots_legendre(k)
    return (x + 1.0) / 2.0, w / 2.0


def triangle_rule(points_per_axis=4):
    """Rule on the triangle {x, y >= 0, x + y <= 1}; weights sum to 1/2."""
    xj, wj = _jacobi01(points_per_axis, 1.0)
    xl, wl = _legendre01(points_per_axis)
    pts = np.empty((points_per_axis**2, 2))
    wts = np.empty(points_per_axis**2)
    idx = 0
    for xi, wi in zip(xj, wj):
        for t, wt in zip(xl, wl):
            pts[idx] = (xi, t * (1.0 - xi))
            wts[idx] = wi * wt
            idx += 1
    return pts, wts


def tetrahedron_rule(points_per_axis=4):
    """Rule on the tet {x, y, z >= 0, x + y + z <= 1}; weights sum to 1/6."""
    x2, w2 = _jacobi01(points_per_axis, 2.0)
    x1, w1 = _jacobi01(points_per_axis, 1.0)
    xl, wl = _legendre01(points_per_axis)
    pts = np.empty((points_per_axis**3, 3))
    wts = np.empty(points_per_axis**3)
    idx = 0
    for xi, wi in zip(x2, w2):
        for eta, we in zip(x1, w1):
            for zeta, wz in zip(xl, wl):
                pts[idx] = (xi, eta * (1.0 - xi), zeta * (1.0 - xi) * (1.0 - eta))
                wts[idx] = wi * we * wz
                idx += 1
    return pts, wts
