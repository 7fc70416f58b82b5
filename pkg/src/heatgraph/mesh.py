"""Planar triangle meshes and the cotangent Laplacian.

The mesh file format is JSON::

    {"vertices": [[x, y], ...], "triangles": [[i, j, k], ...]}

with 1-based triangle indices. In memory, triangles are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (N, 2) float
    triangles: np.ndarray  # (M, 3) int, 0-based

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        T = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        V.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", T)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices) and np.array_equal(
            self.triangles, other.triangles
        )

    def signed_areas(self):
        P = self.vertices[self.triangles]
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self):
        """Unique undirected edges as a sorted (E, 2) array."""
        T = self.triangles
        E = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
        E.sort(axis=1)
        return np.unique(E, axis=0)

    def validate(self):
        """Check indices, triangle areas and connectivity; raise :class:`MeshError`."""
        N = self.n_vertices
        if N == 0 or self.n_triangles == 0:
            raise MeshError("mesh needs at least one vertex and one triangle")
        T = self.triangles
        bad = np.flatnonzero((T < 0).any(axis=1) | (T >= N).any(axis=1))
        if bad.size:
            raise MeshError(f"triangle {bad[0]} references a vertex outside [0, {N})")
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        bbox_area = float(span[0] * span[1])
        areas = np.abs(self.signed_areas())
        degenerate = np.flatnonzero(areas <= 1e-12 * bbox_area)
        if degenerate.size:
            raise MeshError(f"triangle {degenerate[0]} is degenerate (area {areas[degenerate[0]]:.3e})")
        used = np.zeros(N, dtype=bool)
        used[T.ravel()] = True
        if not used.all():
            raise MeshError(f"vertex {np.flatnonzero(~used)[0]} belongs to no triangle")
        E = self.edges()
        A = coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(N, N))
        ncomp, _ = connected_components(A, directed=False)
        if ncomp != 1:
            raise MeshError(f"mesh edge graph has {ncomp} connected components")


def cotan_laplacian(mesh):
    """Cotangent Laplacian of a planar triangle mesh.

    Each triangle adds ``-cot(theta) / 2`` to the off-diagonal entry of the
    edge opposite its angle ``theta``; the diagonal is the negated row sum.
    Weights from obtuse angles stay negative.
    """
    mesh.validate()
    N = mesh.n_vertices
    T = mesh.triangles
    P = mesh.vertices[T]
    cross2 = np.abs(2.0 * mesh.signed_areas())
    L = np.zeros((N, N))
    for c in range(3):
        a, b = (c + 1) % 3, (c + 2) % 3
        u = P[:, a] - P[:, c]
        v = P[:, b] - P[:, c]
        cot = (u * v).sum(axis=1) / cross2
        np.add.at(L, (T[:, a], T[:, b]), -0.5 * cot)
        np.add.at(L, (T[:, b], T[:, a]), -0.5 * cot)
    L[np.diag_indices(N)] = 0.0
    L = 0.5 * (L + L.T)
    L[np.diag_indices(N)] = -L.sum(axis=1)
    return L


def generate_plate_with_cavity(width, height, nx, ny, cavity=None):
    """Structured triangulation of a ``width`` x ``height`` plate with a rectangular hole.

    The plate is covered by an ``(nx+1) x (ny+1)`` grid; every cell is cut
    along its lower-left to upper-right diagonal. Grid points strictly
    inside ``cavity = (x0, y0, x1, y1)`` are dropped together with every
    triangle touching them or lying inside the cavity. Surviving vertices
    are numbered row by row (``y`` outer, ``x`` inner).
    """
    if nx < 1 or ny < 1:
        raise MeshError(f"need nx, ny >= 1, got nx={nx}, ny={ny}")
    if width <= 0 or height <= 0:
        raise MeshError("plate dimensions must be positive")
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys)  # row-major: y outer
    pts = np.column_stack([gx.ravel(), gy.ravel()])

    def gid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            p00, p10, p01, p11 = gid(i, j), gid(i + 1, j), gid(i, j + 1), gid(i + 1, j + 1)
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
    tris = np.array(tris, dtype=np.int64)

    keep = np.ones(len(pts), dtype=bool)
    if cavity is not None:
        x0, y0, x1, y1 = map(float, cavity)
        if not (0 < x0 < x1 < width and 0 < y0 < y1 < height):
            raise MeshError(f"cavity {cavity} must lie strictly inside the plate")

        def inside(p):
            return (p[..., 0] > x0) & (p[..., 0] < x1) & (p[..., 1] > y0) & (p[..., 1] < y1)

        keep = ~inside(pts)
        centroids = pts[tris].mean(axis=1)
        tris = tris[keep[tris].all(axis=1) & ~inside(centroids)]

    used = np.zeros(len(pts), dtype=bool)
    used[tris.ravel()] = True
    orphans = np.flatnonzero(keep & ~used)
    if orphans.size:
        raise MeshError(f"cavity leaves grid point {orphans[0]} without any triangle")
    renumber = -np.ones(len(pts), dtype=np.int64)
    renumber[keep] = np.arange(keep.sum())
    mesh = TriangleMesh(pts[keep], renumber[tris])
    mesh.validate()
    return mesh


def default_plate():
    """The 2 x 1 plate with a central cavity used by the shipped scenarios (138 vertices)."""
    return generate_plate_with_cavity(2.0, 1.0, 16, 8, (0.625, 0.25, 1.375, 0.75))


def load_mesh(path):
    """Read and validate a JSON mesh file (1-based triangle indices)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict) or "vertices" not in data or "triangles" not in data:
        raise MeshError(f"{path}: mesh file needs 'vertices' and 'triangles'")
    verts = data["vertices"]
    for pos, v in enumerate(verts):
        if len(v) != 2:
            raise MeshError(f"{path}: vertex {pos + 1} must be [x, y]")
    N = len(verts)
    tris = []
    for pos, t in enumerate(data["triangles"]):
        if len(t) != 3 or any(int(i) != i for i in t):
            raise MeshError(f"{path}: triangle {pos + 1} must be three integer indices")
        if any(not 1 <= i <= N for i in t):
            raise MeshError(f"{path}: triangle {pos + 1} has index outside [1, {N}]")
        tris.append([int(i) - 1 for i in t])
    mesh = TriangleMesh(np.array(verts, dtype=float), np.array(tris, dtype=np.int64))
    try:
        mesh.validate()
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from exc
    return mesh


def write_mesh(mesh, path):
    data = {
        "vertices": mesh.vertices.tolist(),
        "triangles": (mesh.triangles + 1).tolist(),
    }
    Path(path).write_text(json.dumps(data) + "\n")
