"""Norms and functionals evaluated on piecewise-linear functions.

The H1 norm and the max norms are exact for P1 functions (quadratic form,
nodal maxima); the L^r and W^{1,m} integrands use the degree-7 quadrature,
which is exact whenever r is an even integer <= 6 and approximates the
fractional powers otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import fem_space

__all__ = [
    "norm_h1",
    "norm_lp",
    "norm_linf",
    "norm_w1m",
    "norm_lp_boundary_field",
    "energy_J",
    "gn_ratio",
    "NormReport",
    "norm_report",
]


def norm_h1(u):
    """Square root of the H1 quadratic form (exact for P1)."""
    space = fem_space(u.mesh)
    return math.sqrt(space.h1_operator().quadratic_form(u.values))


def _check_region(region):
    if region not in ("volume", "boundary"):
        raise ValueError(f"region must be 'volume' or 'boundary', got {region!r}")


def norm_lp(u, r, region="volume"):
    """L^r norm of u over the volume or the boundary."""
    r = float(r)
    if r < 1:
        raise ValueError(f"integrability index must be >= 1, got {r}")
    _check_region(region)
    space = fem_space(u.mesh)
    if region == "volume":
        vals = space.volume_values(u.values)
        total = space.volume_integral(np.abs(vals) ** r)
    else:
        vals = space.boundary_values(u.values)
        total = space.boundary_integral(np.abs(vals) ** r)
    return total ** (1.0 / r)


def norm_linf(u, region="volume"):
    """Max of |nodal values|, over all vertices or boundary vertices only."""
    _check_region(region)
    if region == "volume":
        return float(np.max(np.abs(u.values)))
    space = fem_space(u.mesh)
    return float(np.max(np.abs(u.values[space.boundary_vertex_index])))


def norm_w1m(u, m):
    """(int |u|^m + int |grad u|^m)^(1/m); the gradient part is exact."""
    m = float(m)
    if m < 1:
        raise ValueError(f"Sobolev index must be >= 1, got {m}")
    space = fem_space(u.mesh)
    vals = space.volume_values(u.values)
    value_part = space.volume_integral(np.abs(vals) ** m)
    grad_mags = np.linalg.norm(space.gradients(u.values), axis=1)
    grad_part = float(np.sum(space.tet_vols * grad_mags**m))
    return (value_part + grad_part) ** (1.0 / m)


def norm_lp_boundary_field(mesh, g, r):
    """L^r boundary norm of a callable field g(points, normals)."""
    r = float(r)
    if r < 1:
        raise ValueError(f"integrability index must be >= 1, got {r}")
    space = fem_space(mesh)
    vals = np.asarray(g(space.bnd_pts, space.bnd_normals), dtype=float)
    return space.boundary_integral(np.abs(vals) ** r) ** (1.0 / r)


def energy_J(u, nl):
    """Energy 1/2 ||u||_H1^2 - int_bnd F(x, u) of the boundary-flux problem."""
    space = fem_space(u.mesh)
    half_h1 = 0.5 * space.h1_operator().quadratic_form(u.values)
    uq = space.boundary_values(u.values)
    return half_h1 - space.boundary_integral(nl.F(space.bnd_pts, uq))


def gn_ratio(u, ctx):
    """Interpolation ratio ||u||_inf / (||u||_{W^{1,m}}^sigma ||u||_{L^{2*}}^(1-sigma)).

    Scaling invariant (all norms are 1-homogeneous and the exponents sum
    to one); bounded ratios over a corpus are the finite-sample surrogate
    for the interpolation constant.
    """
    sigma = float(ctx.sigma)
    m = float(ctx.m)
    r_vol = float(ctx.two_star)
    top = norm_linf(u)
    w = norm_w1m(u, m)
    lv = norm_lp(u, r_vol, "volume")
    denominator = w**sigma * lv ** (1.0 - sigma)
    if denominator == 0.0:
        raise ValueError("interpolation ratio undefined for the zero function")
    return top / denominator


@dataclass(eq=False)
class NormReport:
    """The six norms the estimate chain manipulates, for one function."""

    h1: float
    linf: float
    l_two_star_volume: float
    l_two_low_star_boundary: float
    w1m: float
    m: float
    linf_boundary: float
    n: int
    p: float
    q: float

    def as_dict(self):
        return {
            "h1": self.h1,
            "linf": self.linf,
            "l_two_star_volume": self.l_two_star_volume,
            "l_two_low_star_boundary": self.l_two_low_star_boundary,
            "w1m": self.w1m,
            "m": self.m,
            "linf_boundary": self.linf_boundary,
            "n": self.n,
            "p": self.p,
            "q": self.q,
        }


def norm_report(u, ctx):
    """Evaluate all chain norms of u under the exponents of ctx."""
    return NormReport(
        h1=norm_h1(u),
        linf=norm_linf(u),
        l_two_star_volume=norm_lp(u, float(ctx.two_star), "volume"),
        l_two_low_star_boundary=norm_lp(u, float(ctx.two_low_star), "boundary"),
        w1m=norm_w1m(u, float(ctx.m)),
        m=float(ctx.m),
        linf_boundary=norm_linf(u, "boundary"),
        n=u.mesh.n,
        p=float(ctx.p),
        q=float(ctx.q),
    )
