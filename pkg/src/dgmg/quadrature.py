"""Quadrature rules and cached basis-trace tables.

Element integrals use a 6-point order-4 triangle rule, edge integrals a
3-point Gauss rule.  Both are exact for products of P1 functions with the
constant coefficients used by the benchmark problems, and accurate enough
for error norms against smooth exact solutions.
"""

import numpy as np

# 6-point degree-4 triangle rule (Dunavant), barycentric points and weights.
# Weights sum to 1; multiply by the element area.
_a1, _w1 = 0.445948490915965, 0.223381589678011
_a2, _w2 = 0.091576213509771, 0.109951743655322
TRI_POINTS = np.array(
    [
        [_a1, _a1, 1.0 - 2.0 * _a1],
        [_a1, 1.0 - 2.0 * _a1, _a1],
        [1.0 - 2.0 * _a1, _a1, _a1],
        [_a2, _a2, 1.0 - 2.0 * _a2],
        [_a2, 1.0 - 2.0 * _a2, _a2],
        [1.0 - 2.0 * _a2, _a2, _a2],
    ]
)
TRI_WEIGHTS = np.array([_w1, _w1, _w1, _w2, _w2, _w2])

# 3-point Gauss rule on the unit interval.  Weights sum to 1; multiply by the
# edge length.
_s = 0.5 * np.sqrt(3.0 / 5.0)
EDGE_POINTS = np.array([0.5 - _s, 0.5, 0.5 + _s])
EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def tri_quad_points(mesh):
    """Physical quadrature points per triangle, shape (nt, 6, 2). Cached."""
    cached = getattr(mesh, "_tri_qp", None)
    if cached is None:
        corners = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
        cached = np.einsum("qa,tad->tqd", TRI_POINTS, corners)
        mesh._tri_qp = cached
    return cached


class EdgeTraces:
    """Per-edge traces of the P1 element basis at edge quadrature points.

    For every edge the tables hold, for the plus side (and the minus side on
    interior edges), the three basis values at the 3 Gauss points and the
    constant normal derivatives n . grad(phi).  These tables are what the
    face terms of every bilinear form and norm are built from.
    """

    def __init__(self, mesh):
        v0 = mesh.vertices[mesh.edge_vertices[:, 0]]  # (ne, 2)
        v1 = mesh.vertices[mesh.edge_vertices[:, 1]]
        t = EDGE_POINTS[None, :, None]
        self.points = v0[:, None, :] * (1.0 - t) + v1[:, None, :] * t  # (ne, 3, 2)

        grads = mesh.grads  # (nt, 3, 2)
        cents = mesh.centroids  # (nt, 2)

        def side_tables(edge_sel, tri_idx):
            g = grads[tri_idx]  # (k, 3, 2)
            d = self.points[edge_sel] - cents[tri_idx][:, None, :]  # (k, 3q, 2)
            # P1 basis: phi_a(x) = 1/3 + grad_a . (x - centroid)
            vals = 1.0 / 3.0 + np.einsum("ead,eqd->eqa", g, d)
            ngrad = np.einsum("ed,ead->ea", mesh.edge_normal[edge_sel], g)
            return vals, ngrad

        everywhere = slice(None)
        self.val_plus, self.ngrad_plus = side_tables(everywhere, mesh.edge_plus)
        interior = mesh.edge_minus >= 0
        self.val_minus = np.zeros_like(self.val_plus)
        self.ngrad_minus = np.zeros_like(self.ngrad_plus)
        if interior.any():
            vals, ngrad = side_tables(interior, mesh.edge_minus[interior])
            self.val_minus[interior] = vals
            self.ngrad_minus[interior] = ngrad


def edge_traces(mesh):
    """Cached :class:`EdgeTraces` for a mesh."""
    cached = getattr(mesh, "_edge_traces", None)
    if cached is None:
        cached = EdgeTraces(mesh)
        mesh._edge_traces = cached
    return cached
