"""Structured tetrahedral meshes of the unit cube (0,1)^3.

Each of the n^3 subcubes is split into the six path tetrahedra that share the
main diagonal (Kuhn split).  The split is translation invariant, so faces of
neighbouring subcubes match and the mesh is conforming at every level.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import permutations

import numpy as np

__all__ = [
    "Mesh",
    "IntegrityReport",
    "build_cube_mesh",
    "mesh_integrity",
    "boundary_vertex_set",
    "dump_mesh",
]

_VOLUME_TOL = 1e-12
_AREA_TOL = 1e-12


@dataclass(eq=False)
class Mesh:
    """Tetrahedral mesh of the unit cube.

    vertices          (nv, 3) coordinates
    tets              (nt, 4) vertex indices, positive signed volume
    boundary_faces    (nf, 3) vertex indices of boundary triangles
    boundary_normals  (nf, 3) outward unit normals
    boundary_parents  (nf,)   index of the unique tet owning each face
    n                 subdivision level (n cells per edge)
    """

    vertices: np.ndarray
    tets: np.ndarray
    boundary_faces: np.ndarray
    boundary_normals: np.ndarray
    boundary_parents: np.ndarray
    n: int

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_tets(self):
        return self.tets.shape[0]

    @property
    def num_boundary_faces(self):
        return self.boundary_faces.shape[0]


def _perm_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


_KUHN_PATHS = tuple(permutations((0, 1, 2)))
_KUHN_SIGNS = tuple(_perm_sign(p) for p in _KUHN_PATHS)


def signed_volumes(vertices, tets):
    """Signed volume of every tet (positive for correct orientation)."""
    vtx = vertices[tets]
    edges = vtx[:, 1:, :] - vtx[:, :1, :]
    return np.linalg.det(edges) / 6.0


def build_cube_mesh(n):
    """Mesh the unit cube with n subdivisions per edge (6*n^3 tets)."""
    if isinstance(n, bool) or not isinstance(n, int):
        raise TypeError("n must be an integer")
    if n < 1:
        raise ValueError(f"subdivision level must be >= 1, got {n}")
    s = n + 1
    ii = np.tile(np.arange(s), s * s)
    jj = np.tile(np.repeat(np.arange(s), s), s)
    kk = np.repeat(np.arange(s), s * s)
    vertices = np.column_stack([ii, jj, kk]).astype(float) / n

    def vid(i, j, k):
        return (k * s + j) * s + i

    tets = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                for path, sign in zip(_KUHN_PATHS, _KUHN_SIGNS):
                    cur = [i, j, k]
                    ids = [vid(*cur)]
                    for axis in path:
                        cur[axis] += 1
                        ids.append(vid(*cur))
                    if sign < 0:
                        ids[2], ids[3] = ids[3], ids[2]
                    tets.append(ids)
    tets = np.array(tets, dtype=np.int64)

    faces, normals, parents = _extract_boundary(vertices, tets)
    return Mesh(
        vertices=vertices,
        tets=tets,
        boundary_faces=faces,
        boundary_normals=normals,
        boundary_parents=parents,
        n=n,
    )


def _face_map(tets):
    """Map sorted face triple -> list of owning tet indices."""
    fmap = defaultdict(list)
    for t, tet in enumerate(tets):
        for omit in range(4):
            tri = tuple(sorted(np.delete(tet, omit)))
            fmap[tri].append(t)
    return fmap


def _extract_boundary(vertices, tets):
    fmap = _face_map(tets)
    faces, normals, parents = [], [], []
    tet_centroids = vertices[tets].mean(axis=1)
    for tri, owners in fmap.items():
        if len(owners) != 1:
            continue
        t = owners[0]
        a, b, c = (vertices[v] for v in tri)
        nvec = np.cross(b - a, c - a)
        nvec = nvec / np.linalg.norm(nvec)
        face_centroid = (a + b + c) / 3.0
        if np.dot(nvec, face_centroid - tet_centroids[t]) < 0:
            nvec = -nvec
        faces.append(tri)
        normals.append(nvec)
        parents.append(t)
    return (
        np.array(faces, dtype=np.int64),
        np.array(normals, dtype=float),
        np.array(parents, dtype=np.int64),
    )


def face_areas(mesh):
    """Areas of all boundary triangles."""
    vtx = mesh.vertices[mesh.boundary_faces]
    cross = np.cross(vtx[:, 1] - vtx[:, 0], vtx[:, 2] - vtx[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


@dataclass(frozen=True)
class IntegrityReport:
    ok: bool
    detail: str = "pass"


def mesh_integrity(mesh):
    """Check every structural invariant; report the first violation."""
    vols = signed_volumes(mesh.vertices, mesh.tets)
    if np.any(vols <= 0):
        t = int(np.argmax(vols <= 0))
        return IntegrityReport(False, f"negative volume: tet {t} has signed volume {vols[t]:.3e}")
    if abs(vols.sum() - 1.0) > _VOLUME_TOL:
        return IntegrityReport(False, f"volume sum {vols.sum()!r} differs from 1")
    areas = face_areas(mesh)
    if abs(areas.sum() - 6.0) > _AREA_TOL:
        return IntegrityReport(False, f"boundary area sum {areas.sum()!r} differs from 6")

    fmap = _face_map(mesh.tets)
    for tri, owners in fmap.items():
        if len(owners) not in (1, 2):
            return IntegrityReport(False, f"face {tri} shared by {len(owners)} tets")
    boundary = {tri: owners[0] for tri, owners in fmap.items() if len(owners) == 1}
    if len(boundary) != mesh.num_boundary_faces:
        return IntegrityReport(
            False,
            f"{mesh.num_boundary_faces} stored boundary faces, {len(boundary)} found",
        )
    tet_centroids = mesh.vertices[mesh.tets].mean(axis=1)
    for f in range(mesh.num_boundary_faces):
        tri = tuple(sorted(mesh.boundary_faces[f]))
        if tri not in boundary:
            return IntegrityReport(False, f"stored face {tri} is not a boundary face")
        if boundary[tri] != mesh.boundary_parents[f]:
            return IntegrityReport(False, f"face {tri} has wrong parent tet")
        nvec = mesh.boundary_normals[f]
        if abs(np.linalg.norm(nvec) - 1.0) > 1e-12:
            return IntegrityReport(False, f"face {tri} normal is not unit length")
        centroid = mesh.vertices[mesh.boundary_faces[f]].mean(axis=0)
        if np.dot(nvec, centroid - tet_centroids[mesh.boundary_parents[f]]) <= 0:
            return IntegrityReport(False, f"inward normal on face {tri}")
    return IntegrityReport(True)


def boundary_vertex_set(mesh):
    """Vertex indices on the boundary (union over boundary faces)."""
    return set(int(v) for v in mesh.boundary_faces.ravel())


def dump_mesh(mesh, path):
    """Write the plain-text dump: one line per vertex, tet and boundary face."""
    with open(path, "w") as out:
        for v in mesh.vertices:
            out.write("v %.17g %.17g %.17g\n" % tuple(v))
        for t in mesh.tets:
            out.write("t %d %d %d %d\n" % tuple(t))
        for f in range(mesh.num_boundary_faces):
            i, j, k = mesh.boundary_faces[f]
            nx, ny, nz = mesh.boundary_normals[f]
            out.write("b %d %d %d %.17g %.17g %.17g\n" % (i, j, k, nx, ny, nz))
