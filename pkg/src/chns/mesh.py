"""Uniform triangulations of axis-aligned rectangles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mesh:
    """Triangulation of a rectangle.

    Vertices are numbered row-major, triangles cell-major (two per grid
    cell, all cells split along the same bottom-left to top-right
    diagonal), so the numbering is reproducible bit-for-bit across runs.
    Arrays are frozen after construction; a mesh can be shared read-only.
    """

    vertices: np.ndarray          # (nv, 2) coordinates
    triangles: np.ndarray         # (nt, 3) vertex indices, counter-clockwise
    edges: np.ndarray             # (ne, 2) vertex pairs, sorted within each pair
    edge_triangles: np.ndarray    # (ne, 2) adjacent triangle indices, -1 if none
    boundary_vertices: np.ndarray
    boundary_edges: np.ndarray
    h: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]


def build_uniform_mesh(nx: int, ny: int,
                       rect: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)) -> Mesh:
    """Triangulate rect into nx*ny cells, each split into two right triangles."""
    if nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be positive, got nx={nx}, ny={ny}")
    x0, y0, x1, y1 = rect
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {rect}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xg, yg = np.meshgrid(xs, ys)
    vertices = np.column_stack([xg.ravel(), yg.ravel()])

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            v00 = j * (nx + 1) + i
            v10 = v00 + 1
            v01 = v00 + (nx + 1)
            v11 = v01 + 1
            tris[k] = (v00, v10, v11)
            tris[k + 1] = (v00, v11, v01)
            k += 2

    edges, edge_tris = _edge_table(tris)
    boundary_edges = np.flatnonzero(edge_tris[:, 1] < 0)
    boundary_vertices = np.unique(edges[boundary_edges].ravel())

    mesh = Mesh(
        vertices=vertices,
        triangles=tris,
        edges=edges,
        edge_triangles=edge_tris,
        boundary_vertices=boundary_vertices,
        boundary_edges=boundary_edges,
        h=0.0,
    )
    mesh.h = mesh_size(mesh)
    for arr in (mesh.vertices, mesh.triangles, mesh.edges, mesh.edge_triangles,
                mesh.boundary_vertices, mesh.boundary_edges):
        arr.flags.writeable = False
    return mesh


def _edge_table(tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique sorted vertex pairs plus the (at most two) triangles sharing each."""
    raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    raw = np.sort(raw, axis=1)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)

    edge_tris = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    tri_of_raw = np.tile(np.arange(tris.shape[0]), 3)
    for e, t in zip(inverse, tri_of_raw):
        if edge_tris[e, 0] < 0:
            edge_tris[e, 0] = t
        else:
            edge_tris[e, 1] = t
    return edges, edge_tris


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas of all triangles (positive for counter-clockwise)."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def mesh_size(mesh: Mesh) -> float:
    """Maximum triangle diameter, i.e. the longest edge over all triangles."""
    p = mesh.vertices[mesh.triangles]
    lengths = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ])
    return float(lengths.max())
