"""Triangulations of the benchmark domains with edge topology.

Meshes are conforming triangulations with counterclockwise elements.  The
hierarchy is produced by uniform red refinement (each triangle split into
four congruent children through the edge midpoints), which halves the mesh
size exactly and preserves shape regularity.

Edge conventions
----------------
Edges are keyed by their sorted vertex-index pair and enumerated in
lexicographic order of those pairs, which makes assembly reproducible.
Every edge carries a fixed unit normal: on interior edges it points out of
the incident triangle with the smaller index (the "plus" element) and into
the other (the "minus" element); on boundary edges it is the outward normal
of the domain.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

EDGE_INTERIOR = 0
EDGE_INFLOW = 1
EDGE_OUTFLOW = 2

KIND_NAMES = {
    EDGE_INTERIOR: "interior",
    EDGE_INFLOW: "boundary_inflow",
    EDGE_OUTFLOW: "boundary_outflow",
}


@dataclass
class EdgeInfo:
    """Record view of a single edge."""

    endpoints: tuple
    length: float
    normal: np.ndarray
    plus_element: int
    minus_element: int | None  # None on boundary edges
    kind: str


def as_velocity(zeta):
    """Normalize a velocity spec (constant pair or callable) to a callable.

    The callable maps an (n, 2) array of points to an (n, 2) array of
    velocity vectors.
    """
    if zeta is None:
        return lambda pts: np.zeros_like(pts)
    if callable(zeta):
        def fn(pts):
            out = np.asarray(zeta(pts), dtype=float)
            return np.broadcast_to(out, pts.shape)
        return fn
    const = np.asarray(zeta, dtype=float).reshape(2)
    return lambda pts: np.broadcast_to(const, pts.shape)


def as_scalar_coefficient(gamma):
    """Normalize a scalar coefficient (constant or callable) to a callable."""
    if gamma is None:
        return lambda pts: np.zeros(pts.shape[:-1])
    if callable(gamma):
        def fn(pts):
            out = np.asarray(gamma(pts), dtype=float)
            return np.broadcast_to(out, pts.shape[:-1])
        return fn
    const = float(gamma)
    return lambda pts: np.full(pts.shape[:-1], const)


class Mesh:
    """Conforming triangulation with edge topology.

    Instances are immutable after construction and safe to share across
    threads; derived geometry (areas, gradients, trace tables) is cached
    lazily.
    """

    def __init__(self, vertices, triangles, level=0, parent_map=None,
                 h_max=None, domain=None, edge_kind=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int32)
        self.level = int(level)
        self.parent_map = parent_map
        self.domain = domain

        areas = _signed_areas(self.vertices, self.triangles)
        if not (areas > 0.0).all():
            raise ValueError("triangles must be counterclockwise with positive area")
        self.areas = areas

        self._build_edges()
        if edge_kind is not None:
            self.edge_kind = np.asarray(edge_kind, dtype=np.int8).copy()

        edge_vec = (self.vertices[self.edge_vertices[:, 1]]
                    - self.vertices[self.edge_vertices[:, 0]])
        self.edge_length = np.hypot(edge_vec[:, 0], edge_vec[:, 1])
        self.h_max = float(self.edge_length.max()) if h_max is None else float(h_max)

        for arr in (self.vertices, self.triangles, self.edge_vertices,
                    self.edge_plus, self.edge_minus, self.edge_kind,
                    self.edge_length, self.edge_normal, self.areas,
                    self.tri_edges):
            arr.flags.writeable = False

    # -- topology ---------------------------------------------------------

    def _build_edges(self):
        tris = self.triangles
        nt = len(tris)
        # local edge slots: (v0,v1), (v1,v2), (v2,v0)
        raw = np.stack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
        raw = raw.reshape(-1, 2)
        keys = np.sort(raw, axis=1)
        uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                          return_counts=True)
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: an edge is shared by >2 triangles")

        ne = len(uniq)
        self.edge_vertices = uniq.astype(np.int32)
        self.tri_edges = inverse.reshape(nt, 3).astype(np.int32)

        plus = np.full(ne, -1, dtype=np.int32)
        minus = np.full(ne, -1, dtype=np.int32)
        tri_of_slot = np.repeat(np.arange(nt, dtype=np.int32), 3)
        # visit slots in reverse so the smaller triangle index wins the plus slot
        order = np.argsort(tri_of_slot, kind="stable")[::-1]
        for slot in order:
            e = inverse[slot]
            t = tri_of_slot[slot]
            minus[e] = plus[e]
            plus[e] = t
        self.edge_plus = plus
        self.edge_minus = minus

        v0 = self.vertices[uniq[:, 0]]
        v1 = self.vertices[uniq[:, 1]]
        d = v1 - v0
        normal = np.stack([d[:, 1], -d[:, 0]], axis=1)
        normal /= np.linalg.norm(normal, axis=1)[:, None]
        # orient out of the plus element
        mid = 0.5 * (v0 + v1)
        cent_plus = self.vertices[tris[plus]].mean(axis=1)
        flip = np.einsum("ed,ed->e", normal, mid - cent_plus) < 0.0
        normal[flip] *= -1.0
        self.edge_normal = normal

        kind = np.full(ne, EDGE_OUTFLOW, dtype=np.int8)
        kind[minus >= 0] = EDGE_INTERIOR
        self.edge_kind = kind

    # -- cached geometry --------------------------------------------------

    @property
    def grads(self):
        """Gradients of the P1 barycentric basis per triangle, (nt, 3, 2)."""
        cached = getattr(self, "_grads", None)
        if cached is None:
            x = self.vertices[self.triangles]  # (nt, 3, 2)
            e = x[:, [1, 2, 0], :] - x[:, [2, 0, 1], :]  # x_{a+1} - x_{a+2}
            cached = np.stack([e[:, :, 1], -e[:, :, 0]], axis=2)
            cached /= (2.0 * self.areas)[:, None, None]
            self._grads = cached
        return cached

    @property
    def centroids(self):
        cached = getattr(self, "_centroids", None)
        if cached is None:
            cached = self.vertices[self.triangles].mean(axis=1)
            self._centroids = cached
        return cached

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edge_vertices)

    @property
    def interior_edges(self):
        return np.flatnonzero(self.edge_kind == EDGE_INTERIOR)

    @property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_kind != EDGE_INTERIOR)

    @property
    def edges(self):
        """Edge records as a list of :class:`EdgeInfo`."""
        cached = getattr(self, "_edge_list", None)
        if cached is None:
            cached = [
                EdgeInfo(
                    endpoints=(int(a), int(b)),
                    length=float(self.edge_length[i]),
                    normal=self.edge_normal[i],
                    plus_element=int(self.edge_plus[i]),
                    minus_element=int(self.edge_minus[i]) if self.edge_minus[i] >= 0 else None,
                    kind=KIND_NAMES[int(self.edge_kind[i])],
                )
                for i, (a, b) in enumerate(self.edge_vertices)
            ]
            self._edge_list = cached
        return cached

    def __repr__(self):
        return (f"Mesh(level={self.level}, triangles={self.num_triangles}, "
                f"vertices={self.num_vertices}, edges={self.num_edges}, "
                f"h_max={self.h_max:.4g})")


def _signed_areas(vertices, triangles):
    x = vertices[triangles]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_initial_mesh(domain):
    """Coarsest triangulation of the unit square or the L-shaped domain.

    The unit square is split along the (0,1)-(1,0) diagonal into two
    triangles.  The L-shaped domain (0,1)^2 minus (0.5,1)^2 consists of
    three half-unit subsquares, each split along its NW-SE diagonal.
    """
    if domain == "unit_square":
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        triangles = np.array([[0, 1, 3], [1, 2, 3]])
    elif domain == "l_shaped":
        vertices = np.array(
            [
                [0.0, 0.0], [0.5, 0.0], [1.0, 0.0],
                [0.0, 0.5], [0.5, 0.5], [1.0, 0.5],
                [0.0, 1.0], [0.5, 1.0],
            ]
        )
        triangles = np.array(
            [
                [0, 1, 3], [1, 4, 3],   # bottom-left subsquare
                [3, 4, 6], [4, 7, 6],   # top-left subsquare
                [1, 2, 4], [2, 5, 4],   # bottom-right subsquare
            ]
        )
    else:
        raise ConfigError(f"unknown domain {domain!r}; expected 'unit_square' or 'l_shaped'")
    return Mesh(vertices, triangles, level=0, domain=domain)


def refine_uniform(mesh):
    """Red refinement: split each triangle into 4 congruent children.

    Children of parent t are emitted consecutively as triangles 4t..4t+3 in
    the fixed order (corner 0, corner 1, corner 2, medial), so transfer
    operators can be built from the known child layout.
    """
    nv = mesh.num_vertices
    # midpoint vertex of edge e gets index nv + e (edges are lexicographic)
    mids = 0.5 * (mesh.vertices[mesh.edge_vertices[:, 0]]
                  + mesh.vertices[mesh.edge_vertices[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    t = mesh.triangles
    m01 = nv + mesh.tri_edges[:, 0]
    m12 = nv + mesh.tri_edges[:, 1]
    m20 = nv + mesh.tri_edges[:, 2]
    children = np.stack(
        [
            np.stack([t[:, 0], m01, m20], axis=1),
            np.stack([m01, t[:, 1], m12], axis=1),
            np.stack([m20, m12, t[:, 2]], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent_map = np.repeat(np.arange(mesh.num_triangles, dtype=np.int32), 4)

    return Mesh(vertices, children, level=mesh.level + 1, parent_map=parent_map,
                h_max=mesh.h_max / 2.0, domain=mesh.domain)


def classify_edges(mesh, zeta):
    """Label boundary edges as inflow (zeta . n < 0 at the midpoint) or outflow.

    Returns a new Mesh sharing geometry with the input; interior edges are
    untouched.
    """
    vel = as_velocity(zeta)
    v0 = mesh.vertices[mesh.edge_vertices[:, 0]]
    v1 = mesh.vertices[mesh.edge_vertices[:, 1]]
    mid = 0.5 * (v0 + v1)
    zn = np.einsum("ed,ed->e", vel(mid), mesh.edge_normal)

    kind = np.where(zn < 0.0, EDGE_INFLOW, EDGE_OUTFLOW).astype(np.int8)
    kind[mesh.edge_minus >= 0] = EDGE_INTERIOR
    return Mesh(mesh.vertices, mesh.triangles, level=mesh.level,
                parent_map=mesh.parent_map, h_max=mesh.h_max,
                domain=mesh.domain, edge_kind=kind)


def dump_mesh(mesh, stream):
    """Write the plain-text debug dump: header `nv nt ne`, then vertices,
    triangles and edge records."""
    close = False
    if isinstance(stream, (str, bytes)):
        stream = open(stream, "w")
        close = True
    try:
        stream.write(f"{mesh.num_vertices} {mesh.num_triangles} {mesh.num_edges}\n")
        for x, y in mesh.vertices:
            stream.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.triangles:
            stream.write(f"{a} {b} {c}\n")
        for i in range(mesh.num_edges):
            a, b = mesh.edge_vertices[i]
            nx, ny = mesh.edge_normal[i]
            stream.write(
                f"{a} {b} {float(mesh.edge_length[i])!r} {float(nx)!r} {float(ny)!r} "
                f"{mesh.edge_plus[i]} {mesh.edge_minus[i]} "
                f"{KIND_NAMES[int(mesh.edge_kind[i])]}\n"
            )
    finally:
        if close:
            stream.close()
