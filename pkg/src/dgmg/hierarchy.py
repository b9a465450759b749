"""Level hierarchy: nested DG spaces, transfers, operators, preconditioners.

The coarse-to-fine transfer is the natural inclusion of nested P1 DG
spaces; under red refinement each fine node sits at a parent vertex or a
parent edge midpoint, so the injection weights are exactly {0, 1/2, 1}.
The fine-to-coarse transfer is the transpose of the injection with respect
to the mesh-dependent inner products, which for the scaled-identity Gram
matrices reduces to (h_k^2 / h_{k-1}^2) P^T = P^T / 4.
"""

import warnings

import numpy as np
import scipy.sparse as sp

from . import backend as backend_mod
from .cycles import damping_factor, estimate_extreme_eigs
from .errors import ConfigError, ContractError
from .forms import advection_assumption_min, assemble_saddle
from .mesh import build_initial_mesh, classify_edges, refine_uniform
from .precond import BlockPreconditioner
from .space import DgSpace, PairField

MAX_LEVELS = 12

# barycentric weights of each child node in the parent triangle, for the
# fixed child layout (corner 0, corner 1, corner 2, medial) of red refinement
_CHILD_WEIGHTS = np.array(
    [
        [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
        [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]],
        [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]],
        [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
    ]
)


def injection_matrix(coarse_space, fine_space):
    """Sparse coarse-to-fine injection for one scalar DG field."""
    fine_mesh = fine_space.mesh
    if fine_mesh.parent_map is None:
        raise ContractError("fine mesh has no parent map")
    nt_f = fine_mesh.num_triangles
    parents = np.asarray(fine_mesh.parent_map, dtype=np.int64)
    child = np.arange(nt_f, dtype=np.int64) - 4 * parents

    weights = _CHILD_WEIGHTS[child]  # (nt_f, 3, 3)
    rows = (3 * np.arange(nt_f, dtype=np.int64)[:, None, None]
            + np.arange(3)[None, :, None] + np.zeros(3, dtype=np.int64)[None, None, :])
    cols = (3 * parents[:, None, None] + np.arange(3)[None, None, :]
            + np.zeros(3, dtype=np.int64)[None, :, None])
    mask = weights.reshape(-1) != 0.0
    mat = sp.coo_matrix(
        (weights.reshape(-1)[mask],
         (rows.reshape(-1)[mask], cols.reshape(-1)[mask])),
        shape=(fine_space.dof_count, coarse_space.dof_count),
    )
    return mat.tocsr()


class Level:
    """One hierarchy level: mesh, space, assembled operators, preconditioner."""

    def __init__(self, mesh, space, ops, saddle, precond=None):
        self.mesh = mesh
        self.space = space
        self.ops = ops
        self.saddle = saddle
        self.precond = precond


class LevelStack:
    """The full hierarchy 0..K consumed by the cycle engine."""

    def __init__(self, levels, injections, beta, sigma, zeta, gamma):
        self.levels = levels
        self.injections = injections  # injections[k]: scalar P_k, k >= 1
        self.beta = beta
        self.sigma = sigma
        self.zeta = zeta
        self.gamma = gamma
        self.kernels = None
        self.eigs = None
        self.lam = None

    # -- basic access -------------------------------------------------------

    @property
    def num_levels(self):
        return len(self.levels)

    @property
    def max_level(self):
        return len(self.levels) - 1

    def space(self, k):
        return self.levels[k].space

    def h2(self, k):
        return self.levels[k].ops.h2

    def dofs(self, k):
        return self.levels[k].space.dof_count

    # -- vector-level operations (used by the cycle engine) ------------------

    def apply_saddle_vec(self, k, x, dual=False):
        return self.levels[k].saddle.apply_vec(x, dual=dual)

    def inject_vec(self, k, coarse):
        """Coarse (level k-1) pair vector -> fine (level k) pair vector."""
        P = self.injections[k]
        nc = self.dofs(k - 1)
        return np.concatenate([P @ coarse[:nc], P @ coarse[nc:]])

    def restrict_vec(self, k, fine):
        """Fine (level k) pair vector -> coarse (level k-1) pair vector,
        the mesh-inner-product transpose of the injection."""
        P = self.injections[k]
        nf = self.dofs(k)
        scale = self.h2(k) / self.h2(k - 1)
        return scale * np.concatenate([P.T @ fine[:nf], P.T @ fine[nf:]])

    def coarse_solve_vec(self, b, dual=False):
        g0_inv = self.kernels.data.g0_inv
        rhs = self.h2(0) * b
        return (g0_inv.T if dual else g0_inv) @ rhs

    def pair_inner_vec(self, k, x, y):
        return self.h2(k) * float(x @ y)

    def session(self):
        return self.kernels.session()

    def __repr__(self):
        return (f"LevelStack(levels={self.num_levels}, beta={self.beta:g}, "
                f"sigma={self.sigma:g}, backend={self.kernels.name})")


def inject(stack, k, coarse):
    """Represent a level-(k-1) pair in the level-k space (componentwise)."""
    if coarse.space is not stack.space(k - 1):
        raise ContractError("pair does not live on level k-1")
    vec = stack.inject_vec(k, coarse.to_vector())
    return PairField.from_vector(stack.space(k), vec)


def restrict(stack, k, fine):
    """Transfer a level-k pair to level k-1 by the mesh-inner-product
    transpose of the injection (componentwise)."""
    if fine.space is not stack.space(k):
        raise ContractError("pair does not live on level k")
    vec = stack.restrict_vec(k, fine.to_vector())
    return PairField.from_vector(stack.space(k - 1), vec)


def build_hierarchy(domain, num_levels, beta, sigma=6.0, zeta=(1.0, 0.0),
                    gamma=0.0, *, inner_smoothing=4, inner_cycles=1,
                    inner_smoother="block_sym_gs", damping_constant=1.0,
                    max_power_iters=200, power_tol=1e-6, seed=0, backend=None):
    """Assemble the level stack 0..num_levels with transfers, inner
    reaction-diffusion hierarchy, eigenvalue estimates and damping factors.

    ``domain`` is a domain tag ('unit_square' or 'l_shaped') or a prebuilt
    coarse Mesh.
    """
    if num_levels < 0:
        raise ConfigError("number of levels must be nonnegative")
    if num_levels > MAX_LEVELS:
        raise ConfigError(
            f"refusing to build more than {MAX_LEVELS} levels (got {num_levels})")
    if beta <= 0.0:
        raise ConfigError("beta must be positive")

    mesh = domain if not isinstance(domain, str) else build_initial_mesh(domain)
    mesh = classify_edges(mesh, zeta)

    assumption = advection_assumption_min(mesh, zeta, gamma)
    if assumption < -1e-12:
        warnings.warn(
            f"advection assumption violated: min(gamma - div(zeta)/2) = "
            f"{assumption:.3e} < 0; the advection-reaction form may be indefinite",
            stacklevel=2)

    meshes = [mesh]
    for _ in range(num_levels):
        meshes.append(classify_edges(refine_uniform(meshes[-1]), zeta))

    levels = []
    injections = [None]
    for k, m in enumerate(meshes):
        space = DgSpace(m)
        saddle = assemble_saddle(space, beta, sigma, zeta, gamma)
        levels.append(Level(m, space, saddle.ops, saddle))
        if k > 0:
            injections.append(injection_matrix(levels[k - 1].space, space))

    stack = LevelStack(levels, injections, beta, sigma, zeta, gamma)

    data = backend_mod.make_kernel_data(
        [lv.ops for lv in levels], [lv.saddle for lv in levels],
        injections, nu=inner_smoothing, inner_cycles=inner_cycles,
        smoother=inner_smoother, seed=seed)
    stack.kernels = backend_mod.make_kernels(data, backend)

    for k, lv in enumerate(levels):
        lv.precond = BlockPreconditioner(stack.kernels, k, lv.space)

    stack.eigs = [
        estimate_extreme_eigs(stack, k, max_iters=max_power_iters,
                              tol=power_tol, seed=seed)
        for k in range(stack.num_levels)
    ]
    stack.lam = np.array([
        damping_factor(stack, k, stack.eigs[k], damping_constant)
        for k in range(stack.num_levels)
    ])
    return stack
