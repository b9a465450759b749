"""Piecewise-linear discontinuous Galerkin space and its norms.

Every triangle carries its own three Lagrange nodes, so the space has
3 * (number of triangles) degrees of freedom and vertex values are
multivalued.  The mesh-dependent inner product is the scaled nodal dot
product h^2 * sum_i u_i v_i over all element-local nodes, which makes its
Gram matrix a scaled identity in the nodal basis.

L2 quantities are computed by exact elementwise quadrature, independent of
the nodal surrogate, so convergence-rate checks are unpolluted.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .quadrature import (TRI_POINTS, TRI_WEIGHTS, EDGE_WEIGHTS,
                         tri_quad_points, edge_traces)


class DgSpace:
    """P1 DG space over a mesh: dof (t, a) -> 3*t + a."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.dof_count = 3 * mesh.num_triangles

    @property
    def dof_map(self):
        """(nt, 3) array mapping (triangle, local node) to the global dof."""
        return np.arange(self.dof_count, dtype=np.int32).reshape(-1, 3)

    @property
    def node_coords(self):
        """(dof_count, 2) coordinates of the element-local Lagrange nodes."""
        return self.mesh.vertices[self.mesh.triangles].reshape(-1, 2)

    @property
    def h(self):
        return self.mesh.h_max

    def zero_field(self):
        return ScalarField(self, np.zeros(self.dof_count))

    def __repr__(self):
        return f"DgSpace(level={self.mesh.level}, dofs={self.dof_count})"


@dataclass
class ScalarField:
    space: DgSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (self.space.dof_count,):
            raise ContractError(
                f"coefficient vector of length {self.coeffs.shape} does not "
                f"match space with {self.space.dof_count} dofs")

    def copy(self):
        return ScalarField(self.space, self.coeffs.copy())


@dataclass
class PairField:
    """The (adjoint, state) unknown pair; both components share one space."""

    p: ScalarField
    y: ScalarField

    def __post_init__(self):
        if self.p.space is not self.y.space:
            raise ContractError("pair components must share one DgSpace")

    @property
    def space(self):
        return self.p.space

    def to_vector(self):
        return np.concatenate([self.p.coeffs, self.y.coeffs])

    @classmethod
    def from_vector(cls, space, vec):
        n = space.dof_count
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (2 * n,):
            raise ContractError(f"expected pair vector of length {2 * n}")
        return cls(ScalarField(space, vec[:n].copy()),
                   ScalarField(space, vec[n:].copy()))

    @classmethod
    def zeros(cls, space):
        return cls(space.zero_field(), space.zero_field())


def _check_same_space(u, v):
    if u.space is not v.space:
        raise ContractError("fields live on different spaces")


def mesh_inner_product(u, v):
    """Nodal inner product h^2 * sum_i u_i v_i (symmetric, positive definite)."""
    _check_same_space(u, v)
    h = u.space.h
    return h * h * float(u.coeffs @ v.coeffs)


def pair_mesh_inner_product(x, y):
    """Mesh-dependent inner product on pairs: sum of the component products."""
    return mesh_inner_product(x.p, y.p) + mesh_inner_product(x.y, y.y)


def _local_coeffs(u):
    return u.coeffs.reshape(-1, 3)


def l2_norm(u):
    """Exact L2 norm via the elementwise P1 mass matrix."""
    uloc = _local_coeffs(u)
    areas = u.space.mesh.areas
    quad = np.einsum("ta,ta->t", uloc, uloc) + uloc.sum(axis=1) ** 2
    return float(np.sqrt(np.sum(areas / 12.0 * quad)))


def _edge_side_values(mesh, uloc):
    """Traces of u on each edge side at the edge quadrature points."""
    tr = edge_traces(mesh)
    up = np.einsum("eqa,ea->eq", tr.val_plus, uloc[mesh.edge_plus])
    interior = mesh.edge_minus >= 0
    um = np.zeros_like(up)
    um[interior] = np.einsum("eqa,ea->eq", tr.val_minus[interior],
                             uloc[mesh.edge_minus[interior]])
    gp = np.einsum("ea,ea->e", tr.ngrad_plus, uloc[mesh.edge_plus])
    gm = np.zeros_like(gp)
    gm[interior] = np.einsum("ea,ea->e", tr.ngrad_minus[interior],
                             uloc[mesh.edge_minus[interior]])
    return up, um, gp, gm, interior


def norm_1h(u):
    """Broken H1-type DG norm: element gradients, scaled jumps, scaled
    normal-derivative averages, summed over all edges (single trace on the
    boundary)."""
    mesh = u.space.mesh
    uloc = _local_coeffs(u)

    gu = np.einsum("tad,ta->td", mesh.grads, uloc)
    grad_term = float(np.sum(mesh.areas * np.einsum("td,td->t", gu, gu)))

    up, um, gp, gm, interior = _edge_side_values(mesh, uloc)
    jump = np.where(interior[:, None], up - um, up)
    # (1/h_e) * ||[u]||^2 = sum_q w_q [u](q)^2  (the edge length cancels)
    jump_term = float(np.sum(jump ** 2 @ EDGE_WEIGHTS))

    avg = np.where(interior, 0.5 * (gp + gm), gp)
    avg_term = float(np.sum(mesh.edge_length ** 2 * avg ** 2))

    return float(np.sqrt(grad_term + jump_term + avg_term))


def norm_h1beta(u, beta):
    """Regularization-weighted norm sqrt(beta^(1/2) |u|_{1,h}^2 + ||u||_{L2}^2)."""
    if beta <= 0.0:
        raise ConfigError("beta must be positive")
    return float(np.sqrt(np.sqrt(beta) * norm_1h(u) ** 2 + l2_norm(u) ** 2))


def pair_norm_h1beta_sq(x, beta):
    """Sum of the squared weighted norms of both pair components."""
    return norm_h1beta(x.p, beta) ** 2 + norm_h1beta(x.y, beta) ** 2


def project_analytic(space, fn):
    """Nodal interpolation: coefficients are the function values at the
    element-local nodes."""
    pts = space.node_coords
    vals = np.asarray(fn(pts), dtype=np.float64)
    return ScalarField(space, np.broadcast_to(vals, (space.dof_count,)).copy())


def l2_error(u, exact):
    """Quadrature L2 distance between a DG field and an analytic function."""
    mesh = u.space.mesh
    pts = tri_quad_points(mesh)  # (nt, 6, 2)
    uh = np.einsum("qa,ta->tq", TRI_POINTS, _local_coeffs(u))
    diff = np.asarray(exact(pts.reshape(-1, 2))).reshape(uh.shape) - uh
    return float(np.sqrt(np.sum(mesh.areas[:, None] * TRI_WEIGHTS * diff ** 2)))


def error_1h(u, exact, grad_exact):
    """Quadrature 1,h-norm distance between a DG field and an analytic
    function with known gradient."""
    mesh = u.space.mesh
    uloc = _local_coeffs(u)

    pts = tri_quad_points(mesh).reshape(-1, 2)
    ge = np.asarray(grad_exact(pts)).reshape(mesh.num_triangles, 6, 2)
    gu = np.einsum("tad,ta->td", mesh.grads, uloc)
    gdiff = ge - gu[:, None, :]
    grad_term = float(np.sum(mesh.areas[:, None] * TRI_WEIGHTS
                             * np.einsum("tqd,tqd->tq", gdiff, gdiff)))

    tr = edge_traces(mesh)
    up, um, gp, gm, interior = _edge_side_values(mesh, uloc)
    fe = np.asarray(exact(tr.points.reshape(-1, 2))).reshape(up.shape)
    err_p, err_m = fe - up, fe - um
    jump = np.where(interior[:, None], err_p - err_m, err_p)
    jump_term = float(np.sum(jump ** 2 @ EDGE_WEIGHTS))

    nge = np.einsum("eqd,ed->eq",
                    np.asarray(grad_exact(tr.points.reshape(-1, 2))).reshape(-1, 3, 2),
                    mesh.edge_normal)
    avg = np.where(interior[:, None], nge - 0.5 * (gp + gm)[:, None],
                   nge - gp[:, None])
    avg_term = float(np.sum(mesh.edge_length[:, None] ** 2
                            * (avg ** 2 @ EDGE_WEIGHTS)))

    return float(np.sqrt(grad_term + jump_term + avg_term))


def evaluate_field(u, points):
    """Evaluate a DG field at arbitrary physical points (test helper).

    Points on inter-element boundaries take the value of the first matching
    triangle.
    """
    mesh = u.space.mesh
    uloc = _local_coeffs(u)
    points = np.atleast_2d(points)
    out = np.empty(len(points))
    # barycentric coordinates wrt every triangle: lam = 1/3 + G . (x - c)
    for i, pt in enumerate(points):
        lam = 1.0 / 3.0 + np.einsum("tad,td->ta", mesh.grads,
                                    pt[None, :] - mesh.centroids)
        inside = np.flatnonzero((lam >= -1e-12).all(axis=1))
        if len(inside) == 0:
            raise ContractError(f"point {pt} is outside the mesh")
        t = inside[0]
        out[i] = lam[t] @ uloc[t]
    return out if out.size > 1 else float(out[0])
