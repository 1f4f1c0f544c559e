"""P1 tetrahedral meshes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import tensor as T

FREE, DIRICHLET, NEUMANN = 0, 1, 2
TAG_NAMES = {FREE: "FREE", DIRICHLET: "DIRICHLET", NEUMANN: "NEUMANN"}


@dataclass
class Mesh:
    """Tetrahedral mesh with tagged boundary triangles.

    Quadrature uses one point per tet (the centroid), so element-wise
    constant fields are indexed like ``tets``.
    """

    vertices: np.ndarray
    tets: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    name: str = field(default="mesh")

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.tets = np.asarray(self.tets, dtype=np.int64)
        self.facets = np.asarray(self.facets, dtype=np.int64).reshape(-1, 3)
        self.facet_tags = np.asarray(self.facet_tags, dtype=np.int64)
        if np.any(self.signed_volumes <= 0):
            raise ValueError("mesh has tets with non-positive signed volume")
        if not np.any(self.facet_tags == DIRICHLET):
            raise ValueError("Dirichlet boundary part must be nonempty")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_tets(self) -> int:
        return self.tets.shape[0]

    @cached_property
    def _edges(self) -> np.ndarray:
        x = self.vertices[self.tets]
        return np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]], axis=-1)

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        return T.det(self._edges) / 6.0

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes)

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """``(n_tets, 4, 3)`` gradients of the P1 hat functions."""
        dinv = T.inv(self._edges)  # rows are grad N_1..N_3
        g0 = -dinv.sum(axis=1, keepdims=True)
        return np.concatenate([g0, dinv], axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.tets].mean(axis=1)

    @property
    def quad_points(self) -> np.ndarray:
        return self.centroids

    @cached_property
    def facet_areas(self) -> np.ndarray:
        x = self.vertices[self.facets]
        return 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)

    def facet_nodes(self, tag: int) -> np.ndarray:
        return np.unique(self.facets[self.facet_tags == tag])

    @cached_property
    def dirichlet_nodes(self) -> np.ndarray:
        return self.facet_nodes(DIRICHLET)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.facets)

    @cached_property
    def free_mask(self) -> np.ndarray:
        """``(n_vertices, 3)`` boolean mask of displacement unknowns."""
        m = np.ones((self.n_vertices, 3), dtype=bool)
        m[self.dirichlet_nodes] = False
        return m

    @property
    def volume(self) -> float:
        return float(self.volumes.sum())

    def gradient(self, y: np.ndarray) -> np.ndarray:
        """Element-constant gradient of a P1 vector field, ``(n_tets, 3, 3)``."""
        return np.einsum("tai,taj->tij", y[self.tets], self.shape_gradients)

    def centroid_values(self, nodal: np.ndarray) -> np.ndarray:
        return nodal[self.tets].mean(axis=1)


def _boundary_facets(tets: np.ndarray) -> np.ndarray:
    faces = np.concatenate([tets[:, [1, 2, 3]], tets[:, [0, 2, 3]], tets[:, [0, 1, 3]], tets[:, [0, 1, 2]]])
    key = np.sort(faces, axis=1)
    _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    return faces[np.sort(idx[counts == 1])]


def unit_cube(n: int, dirichlet: str = "x0", neumann: str = "x1") -> Mesh:
    """Kuhn subdivision of an ``n x n x n`` grid on the unit cube (6 n^3 tets).

    ``dirichlet`` / ``neumann`` name cube faces as ``x0, x1, y0, y1, z0, z1``
    (coordinate and side) or ``all`` for the whole boundary.
    """
    if n < 1:
        raise ValueError("n must be positive")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    tets = []
    unit = np.eye(3, dtype=int)
    for i, j, k in itertools.product(range(n), repeat=3):
        base = np.array([i, j, k])
        for perm in itertools.permutations(range(3)):
            path = [base.copy()]
            for ax in perm:
                path.append(path[-1] + unit[ax])
            tets.append([vid(*p) for p in path])
    tets = np.array(tets, dtype=np.int64)
    x = vertices[tets]
    vol = T.det(np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]], axis=-1))
    flip = vol < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3], tets[flip, 2].copy()

    facets = _boundary_facets(tets)
    tags = np.full(len(facets), FREE, dtype=np.int64)
    for tag, face in ((NEUMANN, neumann), (DIRICHLET, dirichlet)):
        if not face:
            continue
        if face == "all":
            tags[:] = tag
            continue
        axis = "xyz".index(face[0])
        side = float(face[1])
        on_face = np.all(np.isclose(vertices[facets][:, :, axis], side), axis=1)
        tags[on_face] = tag
    return Mesh(vertices, tets, facets, tags, name=f"unit_cube_{n}")


def single_tet() -> Mesh:
    """Reference tet with the face ``x = 0`` clamped and the opposite face free-loaded."""
    vertices = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    tets = np.array([[0, 1, 2, 3]])
    facets = np.array([[0, 2, 3], [1, 2, 3], [0, 1, 3], [0, 1, 2]])
    tags = np.array([DIRICHLET, NEUMANN, FREE, FREE])
    return Mesh(vertices, tets, facets, tags, name="single_tet")
