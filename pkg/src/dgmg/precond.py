"""Block-diagonal preconditioner built from an inner multigrid solve.

The scalar block approximates the inverse of the reaction-diffusion
operator sqrt(beta) * A_sip + M (the SIP discretization of
-sqrt(beta) * Laplace(u) + u = phi with weak Dirichlet data) by a fixed
number of V(nu, nu) cycles with damped point-Jacobi smoothing, injection /
transposed-injection transfers, and a direct solve on the coarsest level.
A fixed cycle count from a zero initial guess makes the map linear, and
identical pre-/post-sweeps keep it symmetric positive definite in the
mesh-dependent inner product.
"""

import numpy as np

from .errors import ContractError
from .space import PairField, ScalarField


class BlockPreconditioner:
    """Blockwise approximate inverse diag(L, L)^{-1} on one level."""

    def __init__(self, kernels, level, space):
        self.kernels = kernels
        self.level = level
        self.space = space

    @property
    def rd_matrices(self):
        """Assembled reaction-diffusion matrices of levels 0..k."""
        return [self.kernels.data.levels[j].rd for j in range(self.level + 1)]

    @property
    def rd_smoother_scale(self):
        """Damped-Jacobi weights of levels 0..k."""
        return self.kernels.data.omegas[: self.level + 1]

    @property
    def cycles(self):
        return self.kernels.data.inner_cycles

    @property
    def smoothing_steps(self):
        nu = self.kernels.data.nu
        return (nu, nu)

    # -- applications (pure; a fresh session per call keeps them reentrant) --

    def apply_scalar_inverse_vec(self, phi, session=None):
        sess = session or self.kernels.session()
        h2 = self.kernels.data.levels[self.level].h2
        return sess.rd_solve(self.level, h2 * np.asarray(phi, dtype=float))

    def apply_pair_inverse_vec(self, x, session=None):
        sess = session or self.kernels.session()
        n = self.kernels.data.levels[self.level].n
        return np.concatenate([
            self.apply_scalar_inverse_vec(x[:n], sess),
            self.apply_scalar_inverse_vec(x[n:], sess),
        ])


def apply_scalar_inverse(pc, phi):
    """Approximate scalar reaction-diffusion inverse applied to a field."""
    if phi.space is not pc.space:
        raise ContractError("field does not live on the preconditioner's level")
    return ScalarField(pc.space, pc.apply_scalar_inverse_vec(phi.coeffs))


def apply_pair_inverse(pc, x):
    """Componentwise scalar inverse on a pair field."""
    if x.space is not pc.space:
        raise ContractError("pair does not live on the preconditioner's level")
    return PairField.from_vector(pc.space, pc.apply_pair_inverse_vec(x.to_vector()))
