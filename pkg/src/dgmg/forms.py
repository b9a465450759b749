"""Assembly of the DG bilinear forms and the saddle-point operator.

All matrices follow the convention A[i, j] = form(phi_j, phi_i) (trial j,
test i), so matrix-vector products implement form(u, phi_i).

The saddle operator acts in the geometry of the mesh-dependent inner
product: with the Galerkin block matrix

    G = [[sqrt(beta) * A^T, -M], [-M, -sqrt(beta) * A]],   A = A_sip + A_ar,

the operator application is D^{-1} G (D = h^2 I), so that testing the
result in the mesh-dependent inner product reproduces the saddle bilinear
form.  The transpose is D^{-1} G^T, which makes the pair exactly adjoint in
that inner product by construction.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .mesh import EDGE_INTERIOR, EDGE_INFLOW, as_velocity, as_scalar_coefficient
from .quadrature import (TRI_POINTS, TRI_WEIGHTS, EDGE_WEIGHTS,
                         tri_quad_points, edge_traces)
from .space import PairField, ScalarField


# -- local block scatter ----------------------------------------------------

def _scatter(blocks, dofs, n):
    """Accumulate (e, i, j) local blocks into a CSR matrix via COO."""
    rows = np.repeat(dofs, dofs.shape[1], axis=1)
    cols = np.tile(dofs, (1, dofs.shape[1]))
    mat = sp.coo_matrix((blocks.reshape(-1), (rows.reshape(-1), cols.reshape(-1))),
                        shape=(n, n))
    return mat.tocsr()


def _tri_dofs(mesh):
    return (3 * np.arange(mesh.num_triangles, dtype=np.int64)[:, None]
            + np.arange(3)[None, :])


def _edge_dofs(mesh, edges, side):
    tri = (mesh.edge_plus if side == "plus" else mesh.edge_minus)[edges]
    return 3 * tri.astype(np.int64)[:, None] + np.arange(3)[None, :]


# -- volume and face contributions -------------------------------------------

def assemble_mass(space):
    """Exact L2 mass matrix."""
    mesh = space.mesh
    loc = (mesh.areas[:, None, None] / 12.0
           * (np.eye(3) + np.ones((3, 3)))[None, :, :])
    return _scatter(loc, _tri_dofs(mesh), space.dof_count)


def assemble_sip(space, sigma):
    """Symmetric interior penalty matrix over all edges; boundary edges use
    single-sided traces (weak homogeneous Dirichlet)."""
    mesh = space.mesh
    n = space.dof_count
    tr = edge_traces(mesh)

    # volume gradients
    g = mesh.grads
    vol = mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    mat = _scatter(vol, _tri_dofs(mesh), n)

    interior = mesh.interior_edges
    boundary = mesh.boundary_edges

    if len(interior):
        jv = np.concatenate([tr.val_plus[interior], -tr.val_minus[interior]], axis=2)
        ag = 0.5 * np.concatenate([tr.ngrad_plus[interior],
                                   tr.ngrad_minus[interior]], axis=1)
        he = mesh.edge_length[interior]
        jw = np.einsum("q,eqi->ei", EDGE_WEIGHTS, jv)  # int_e [phi_i] / h_e
        consist = he[:, None, None] * (ag[:, None, :] * jw[:, :, None]
                                       + ag[:, :, None] * jw[:, None, :])
        penalty = sigma * np.einsum("q,eqi,eqj->eij", EDGE_WEIGHTS, jv, jv)
        dofs = np.concatenate([_edge_dofs(mesh, interior, "plus"),
                               _edge_dofs(mesh, interior, "minus")], axis=1)
        mat += _scatter(penalty - consist, dofs, n)

    if len(boundary):
        v = tr.val_plus[boundary]
        ng = tr.ngrad_plus[boundary]
        he = mesh.edge_length[boundary]
        vw = np.einsum("q,eqi->ei", EDGE_WEIGHTS, v)
        consist = he[:, None, None] * (ng[:, None, :] * vw[:, :, None]
                                       + ng[:, :, None] * vw[:, None, :])
        penalty = sigma * np.einsum("q,eqi,eqj->eij", EDGE_WEIGHTS, v, v)
        mat += _scatter(penalty - consist, _edge_dofs(mesh, boundary, "plus"), n)

    return mat


def assemble_ar(space, zeta, gamma):
    """Unstabilized (centered-flux) advection-reaction matrix.

    The face sum runs over interior and inflow-boundary edges only; the
    mesh must have been classified for this velocity.
    """
    mesh = space.mesh
    n = space.dof_count
    vel = as_velocity(zeta)
    react = as_scalar_coefficient(gamma)
    tr = edge_traces(mesh)

    pts = tri_quad_points(mesh)
    flat = pts.reshape(-1, 2)
    zq = vel(flat).reshape(mesh.num_triangles, 6, 2)
    gq = react(flat).reshape(mesh.num_triangles, 6)

    adv = np.einsum("q,qi,eqd,ejd->eij", TRI_WEIGHTS, TRI_POINTS, zq, mesh.grads)
    rea = np.einsum("q,eq,qi,qj->eij", TRI_WEIGHTS, gq, TRI_POINTS, TRI_POINTS)
    vol = mesh.areas[:, None, None] * (adv + rea)
    mat = _scatter(vol, _tri_dofs(mesh), n)

    interior = mesh.interior_edges
    inflow = np.flatnonzero(mesh.edge_kind == EDGE_INFLOW)

    if len(interior):
        zn = np.einsum("eqd,ed->eq",
                       vel(tr.points[interior].reshape(-1, 2)).reshape(-1, 3, 2),
                       mesh.edge_normal[interior])
        jv = np.concatenate([tr.val_plus[interior], -tr.val_minus[interior]], axis=2)
        av = 0.5 * np.concatenate([tr.val_plus[interior],
                                   tr.val_minus[interior]], axis=2)
        he = mesh.edge_length[interior]
        blocks = -np.einsum("e,q,eq,eqi,eqj->eij", he, EDGE_WEIGHTS, zn, av, jv)
        dofs = np.concatenate([_edge_dofs(mesh, interior, "plus"),
                               _edge_dofs(mesh, interior, "minus")], axis=1)
        mat += _scatter(blocks, dofs, n)

    if len(inflow):
        zn = np.einsum("eqd,ed->eq",
                       vel(tr.points[inflow].reshape(-1, 2)).reshape(-1, 3, 2),
                       mesh.edge_normal[inflow])
        v = tr.val_plus[inflow]
        he = mesh.edge_length[inflow]
        blocks = -np.einsum("e,q,eq,eqi,eqj->eij", he, EDGE_WEIGHTS, zn, v, v)
        mat += _scatter(blocks, _edge_dofs(mesh, inflow, "plus"), n)

    return mat


def norm1h_matrix(space):
    """Gram matrix of the 1,h norm (cached on the space)."""
    cached = getattr(space, "_norm1h_matrix", None)
    if cached is not None:
        return cached
    mesh = space.mesh
    n = space.dof_count
    tr = edge_traces(mesh)

    g = mesh.grads
    vol = mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    mat = _scatter(vol, _tri_dofs(mesh), n)

    interior = mesh.interior_edges
    boundary = mesh.boundary_edges
    if len(interior):
        jv = np.concatenate([tr.val_plus[interior], -tr.val_minus[interior]], axis=2)
        ag = 0.5 * np.concatenate([tr.ngrad_plus[interior],
                                   tr.ngrad_minus[interior]], axis=1)
        he = mesh.edge_length[interior]
        blocks = (np.einsum("q,eqi,eqj->eij", EDGE_WEIGHTS, jv, jv)
                  + (he ** 2)[:, None, None] * ag[:, :, None] * ag[:, None, :])
        dofs = np.concatenate([_edge_dofs(mesh, interior, "plus"),
                               _edge_dofs(mesh, interior, "minus")], axis=1)
        mat += _scatter(blocks, dofs, n)
    if len(boundary):
        v = tr.val_plus[boundary]
        ng = tr.ngrad_plus[boundary]
        he = mesh.edge_length[boundary]
        blocks = (np.einsum("q,eqi,eqj->eij", EDGE_WEIGHTS, v, v)
                  + (he ** 2)[:, None, None] * ng[:, :, None] * ng[:, None, :])
        mat += _scatter(blocks, _edge_dofs(mesh, boundary, "plus"), n)

    space._norm1h_matrix = mat
    return mat


# -- level operators ---------------------------------------------------------

@dataclass
class LevelOperators:
    """Assembled sparse operators of one level."""

    space: object
    A_sip: sp.csr_matrix
    A_ar: sp.csr_matrix
    M: sp.csr_matrix
    beta: float
    sigma: float
    zeta: object
    gamma: object
    A: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        self.A = (self.A_sip + self.A_ar).tocsr()

    @property
    def h2(self):
        h = self.space.h
        return h * h

    @property
    def D(self):
        """Mesh-inner-product Gram matrix h^2 I."""
        return sp.identity(self.space.dof_count, format="dia") * self.h2


class SaddleOperator:
    """The saddle-point system operator and its mesh-inner-product transpose."""

    def __init__(self, ops):
        self.ops = ops
        sb = np.sqrt(ops.beta)
        A, M = ops.A, ops.M
        self.block = sp.bmat([[sb * A.T, -M], [-M, -sb * A]], format="csr")
        self.block_t = self.block.T.tocsr()

    @property
    def space(self):
        return self.ops.space

    def apply_vec(self, x, dual=False):
        mat = self.block_t if dual else self.block
        return mat @ x / self.ops.h2

    def bilinear_vec(self, x, w):
        """Saddle bilinear form of trial pair x against test pair w."""
        return float(w @ (self.block @ x))

    def apply(self, x):
        return PairField.from_vector(self.space, self.apply_vec(x.to_vector()))

    def apply_transpose(self, x):
        return PairField.from_vector(self.space,
                                     self.apply_vec(x.to_vector(), dual=True))


def assemble_level(space, beta, sigma, zeta, gamma):
    if beta <= 0.0:
        raise ConfigError("beta must be positive")
    if sigma <= 0.0:
        raise ConfigError("penalty parameter sigma must be positive")
    return LevelOperators(
        space=space,
        A_sip=assemble_sip(space, sigma),
        A_ar=assemble_ar(space, zeta, gamma),
        M=assemble_mass(space),
        beta=beta, sigma=sigma, zeta=zeta, gamma=gamma,
    )


def assemble_saddle(space, beta, sigma, zeta, gamma):
    return SaddleOperator(assemble_level(space, beta, sigma, zeta, gamma))


# -- right-hand sides ---------------------------------------------------------

def load_vector(space, fn):
    """Galerkin load vector b_i = int fn * phi_i by quadrature."""
    mesh = space.mesh
    pts = tri_quad_points(mesh)
    fq = np.asarray(fn(pts.reshape(-1, 2)), dtype=float).reshape(mesh.num_triangles, 6)
    loc = mesh.areas[:, None] * np.einsum("q,tq,qa->ta", TRI_WEIGHTS, fq, TRI_POINTS)
    return loc.reshape(-1)


def general_rhs(space, f_fun, g_fun):
    """Pair representing two independent L2 load functionals in the
    mesh-inner-product geometry."""
    h2 = space.h ** 2
    f = load_vector(space, f_fun) / h2
    g = load_vector(space, g_fun) / h2
    return PairField(ScalarField(space, f), ScalarField(space, g))


def load_functional(space, y_d, beta):
    """Right-hand side of the optimal control problem: the tracking target
    enters the first slot with weight -beta^(1/4); the second slot is zero."""
    if beta <= 0.0:
        raise ConfigError("beta must be positive")
    scale = beta ** 0.25
    return general_rhs(space, lambda p: -scale * np.asarray(y_d(p)),
                       lambda p: np.zeros(len(p)))


def advection_assumption_min(mesh, zeta, gamma, div_zeta=None):
    """Smallest sampled value of gamma - div(zeta)/2 over the element
    quadrature points (negative values break positive semidefiniteness of
    the advection-reaction form)."""
    react = as_scalar_coefficient(gamma)
    pts = tri_quad_points(mesh).reshape(-1, 2)
    if div_zeta is not None:
        div = np.asarray(div_zeta(pts), dtype=float)
    elif callable(zeta):
        vel = as_velocity(zeta)
        eps = 1e-6
        ex = np.array([eps, 0.0])
        ey = np.array([0.0, eps])
        div = ((vel(pts + ex)[:, 0] - vel(pts - ex)[:, 0])
               + (vel(pts + ey)[:, 1] - vel(pts - ey)[:, 1])) / (2 * eps)
    else:
        div = np.zeros(len(pts))
    return float(np.min(react(pts) - 0.5 * div))


def write_coo(matrix, stream):
    """Export a sparse matrix as `i j value` text with a shape header."""
    close = False
    if isinstance(stream, (str, bytes)):
        stream = open(stream, "w")
        close = True
    try:
        coo = sp.coo_matrix(matrix)
        stream.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            stream.write(f"{i} {j} {float(v)!r}\n")
    finally:
        if close:
            stream.close()
