"""P1 finite-element assembly on cube meshes.

Provides the H1 operator (stiffness + mass, exact for piecewise linears),
boundary load vectors and boundary-weighted mass operators, all built with
the degree-7 quadrature rules from :mod:`boundlab.quadrature`.  Assembly is
sequential with a fixed element order, so repeated runs are bit-identical.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import face_areas
from .quadrature import tetrahedron_rule, triangle_rule

__all__ = [
    "FemFunction",
    "SparseOperator",
    "interpolate",
    "fem_space",
    "assemble_h1_operator",
    "assemble_mass_operator",
    "assemble_boundary_load",
    "assemble_boundary_jacobian",
]


@dataclass(eq=False)
class FemFunction:
    """Nodal values of a piecewise-linear function on a mesh."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_vertices,):
            raise ValueError(
                f"expected {self.mesh.num_vertices} nodal values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("nodal values must be finite")


def interpolate(mesh, fn):
    """FemFunction with nodal values fn(vertices); fn is vectorized over points."""
    return FemFunction(mesh, np.asarray(fn(mesh.vertices), dtype=float))


@dataclass(eq=False)
class SparseOperator:
    """Symmetric sparse operator acting on nodal value vectors."""

    matrix: sparse.csr_matrix

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def apply(self, values):
        return self.matrix @ values

    def quadratic_form(self, values):
        return float(values @ (self.matrix @ values))

    def diagonal(self):
        return self.matrix.diagonal()


class _FemSpace:
    """Cached geometry, quadrature and operators for one mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.nv = mesh.num_vertices

        vtx = mesh.vertices[mesh.tets]                        # (nt, 4, 3)
        edges = vtx[:, 1:, :] - vtx[:, :1, :]                 # (nt, 3, 3)
        dets = np.linalg.det(edges)
        self.tet_vols = dets / 6.0
        if np.any(self.tet_vols <= 0):
            raise ValueError("degenerate tet: non-positive volume in mesh")
        inv = np.linalg.inv(edges)                            # (nt, 3, 3)
        grads = np.empty((mesh.num_tets, 4, 3))
        grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        self.grad_basis = grads

        ref_pts, ref_w = tetrahedron_rule()
        lam = np.column_stack([1.0 - ref_pts.sum(axis=1), ref_pts])  # (nq, 4)
        self.vol_basis = lam
        self.vol_pts = np.einsum("qi,tid->tqd", lam, vtx)
        self.vol_w = np.outer(6.0 * self.tet_vols, ref_w)            # rows sum to vol

        bref_pts, bref_w = triangle_rule()
        blam = np.column_stack([1.0 - bref_pts.sum(axis=1), bref_pts])  # (nqb, 3)
        self.bnd_basis = blam
        # products b_i*b_j are formed once so weighted sums stay bitwise symmetric
        self.bnd_basis_pairs = blam[:, :, None] * blam[:, None, :]
        fvtx = mesh.vertices[mesh.boundary_faces]
        self.face_areas = face_areas(mesh)
        self.bnd_pts = np.einsum("qi,fid->fqd", blam, fvtx)
        self.bnd_w = np.outer(2.0 * self.face_areas, bref_w)
        self.bnd_normals = np.broadcast_to(
            mesh.boundary_normals[:, None, :], self.bnd_pts.shape
        )
        self.boundary_vertex_index = np.unique(mesh.boundary_faces.ravel())

        self._h1 = None
        self._mass = None

    # -- operators ---------------------------------------------------------

    def _scatter_tets(self, element_matrices):
        rows = np.broadcast_to(self.mesh.tets[:, :, None], element_matrices.shape)
        cols = np.broadcast_to(self.mesh.tets[:, None, :], element_matrices.shape)
        mat = sparse.coo_matrix(
            (element_matrices.ravel(), (rows.ravel(), cols.ravel())),
            shape=(self.nv, self.nv),
        )
        return SparseOperator(mat.tocsr())

    def mass_operator(self):
        if self._mass is None:
            pattern = (np.ones((4, 4)) + np.eye(4)) / 20.0
            me = self.tet_vols[:, None, None] * pattern
            self._mass = self._scatter_tets(me)
        return self._mass

    def h1_operator(self):
        if self._h1 is None:
            ke = np.einsum("tid,tjd->tij", self.grad_basis, self.grad_basis)
            ke *= self.tet_vols[:, None, None]
            pattern = (np.ones((4, 4)) + np.eye(4)) / 20.0
            ke += self.tet_vols[:, None, None] * pattern
            self._h1 = self._scatter_tets(ke)
        return self._h1

    # -- evaluation at quadrature points ------------------------------------

    def volume_values(self, values):
        return values[self.mesh.tets] @ self.vol_basis.T      # (nt, nq)

    def boundary_values(self, values):
        return values[self.mesh.boundary_faces] @ self.bnd_basis.T  # (nf, nqb)

    def gradients(self, values):
        return np.einsum("tid,ti->td", self.grad_basis, values[self.mesh.tets])

    def volume_integral(self, point_values):
        return float(np.sum(self.vol_w * point_values))

    def boundary_integral(self, point_values):
        return float(np.sum(self.bnd_w * point_values))

    # -- boundary assembly ---------------------------------------------------

    def boundary_load_from_values(self, point_values):
        contrib = np.einsum("fq,qi->fi", self.bnd_w * point_values, self.bnd_basis)
        load = np.zeros(self.nv)
        np.add.at(load, self.mesh.boundary_faces, contrib)
        return load

    def boundary_operator_from_values(self, point_values):
        entries = np.einsum(
            "fq,qij->fij", self.bnd_w * point_values, self.bnd_basis_pairs
        )
        rows = np.broadcast_to(self.mesh.boundary_faces[:, :, None], entries.shape)
        cols = np.broadcast_to(self.mesh.boundary_faces[:, None, :], entries.shape)
        mat = sparse.coo_matrix(
            (entries.ravel(), (rows.ravel(), cols.ravel())), shape=(self.nv, self.nv)
        )
        return SparseOperator(mat.tocsr())


_SPACE_CACHE = weakref.WeakKeyDictionary()


def fem_space(mesh):
    """Memoized assembly workspace for a mesh (meshes are immutable)."""
    space = _SPACE_CACHE.get(mesh)
    if space is None:
        space = _FemSpace(mesh)
        _SPACE_CACHE[mesh] = space
    return space


def assemble_h1_operator(mesh):
    """Stiffness + mass operator of the H1 inner product, exact for P1."""
    return fem_space(mesh).h1_operator()


def assemble_mass_operator(mesh):
    """Volume mass operator alone (exact P1 formula)."""
    return fem_space(mesh).mass_operator()


def _boundary_field_values(space, g):
    values = np.asarray(g(space.bnd_pts, space.bnd_normals), dtype=float)
    if values.shape != space.bnd_w.shape:
        values = np.broadcast_to(values, space.bnd_w.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("boundary field produced non-finite values at quadrature points")
    return values


def assemble_boundary_load(mesh, g):
    """Load vector l_i = integral over the boundary of g * basis_i.

    ``g(points, normals)`` receives quadrature points of shape (nf, nqb, 3)
    together with matching outward unit normals, and returns values of the
    same leading shape.
    """
    space = fem_space(mesh)
    return space.boundary_load_from_values(_boundary_field_values(space, g))


def assemble_boundary_jacobian(mesh, w):
    """Boundary-weighted mass operator with entries int_bnd w * basis_i * basis_j."""
    space = fem_space(mesh)
    return space.boundary_operator_from_values(_boundary_field_values(space, w))
