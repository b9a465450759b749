"""Pure-Python (scipy) implementation of the hot solver kernels.

Mirrors the arithmetic of the compiled core exactly: the inner V(nu, nu)
reaction-diffusion cycles (damped point-Jacobi, element-block Jacobi or
symmetric Gauss-Seidel smoothing; injection / transposed-injection
transfers; dense direct solve on the coarsest level) and the saddle
smoothing updates in both operator orders.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular


class PySession:
    """Stateless scipy-based kernel session."""

    def __init__(self, data):
        self.data = data
        if data.smoother == "sym_gs":
            self._tri = [
                (sp.csr_matrix(sp.tril(L.rd)), sp.csr_matrix(sp.triu(L.rd)))
                for L in data.levels
            ]

    # -- inner smoothers ----------------------------------------------------

    def _smooth_rd(self, k, u, b, steps, backward):
        L = self.data.levels[k]
        if self.data.smoother == "jacobi":
            for _ in range(steps):
                u += L.rd_dinv * (b - L.rd @ u)
        elif self.data.smoother == "block_jacobi":
            for _ in range(steps):
                r = (b - L.rd @ u).reshape(-1, 3)
                u += np.einsum("tij,tj->ti", L.rd_binv, r).reshape(-1)
        elif self.data.smoother == "sym_gs":
            # symmetric Gauss-Seidel: forward pre-sweeps, backward post
            lower, upper = self._tri[k]
            tri = upper if backward else lower
            for _ in range(steps):
                u += spsolve_triangular(tri, b - L.rd @ u, lower=not backward,
                                        unit_diagonal=False)
        else:  # element-block symmetric Gauss-Seidel
            A = L.rd
            order = range(L.n // 3 - 1, -1, -1) if backward else range(L.n // 3)
            for _ in range(steps):
                for t in order:
                    rows = slice(3 * t, 3 * t + 3)
                    acc = b[rows] - A[rows, :] @ u + A[rows, rows] @ u[rows]
                    u[rows] = L.rd_binv[t] @ acc
        return u

    def _vcycle(self, k, b):
        d = self.data
        if k == 0:
            return d.rd0_inv @ b
        L = d.levels[k]
        u = self._smooth_rd(k, np.zeros_like(b), b, d.nu, False)
        coarse = self._vcycle(k - 1, L.PT @ (b - L.rd @ u))
        u += L.P @ coarse
        return self._smooth_rd(k, u, b, d.nu, True)

    def rd_solve(self, k, b):
        """Approximate inverse of the level-k reaction-diffusion matrix:
        a fixed number of V(nu, nu) cycles from a zero initial guess."""
        u = self._vcycle(k, b)
        for _ in range(self.data.inner_cycles - 1):
            u += self._vcycle(k, b - self.data.levels[k].rd @ u)
        return u

    # -- saddle smoothing ----------------------------------------------------

    def smooth(self, k, x, b, lam, steps, post=False, dual=False):
        """Run ``steps`` smoothing updates in place on the pair vector x.

        Pre-smoothing applies the preconditioner before the transposed
        operator; post-smoothing applies them in the opposite order.  The
        dual variant swaps the saddle operator and its transpose.
        """
        L = self.data.levels[k]
        n = L.n
        inv_h2 = 1.0 / L.h2
        G_fwd = L.GT if dual else L.G
        G_adj = L.G if dual else L.GT
        for _ in range(steps):
            r = b - inv_h2 * (G_fwd @ x)
            if not post:
                t = G_adj @ r  # h2 cancels against the inner D-scaling
                x[:n] += lam * self.rd_solve(k, t[:n])
                x[n:] += lam * self.rd_solve(k, t[n:])
            else:
                w = np.concatenate([self.rd_solve(k, L.h2 * r[:n]),
                                    self.rd_solve(k, L.h2 * r[n:])])
                x += (lam * inv_h2) * (G_adj @ w)
        return x
