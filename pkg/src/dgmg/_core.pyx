# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernels: inner reaction-diffusion V-cycles and the
saddle smoothing iterations.

Mirrors dgmg._pycore exactly; per-level CSR matrices are packed into flat
arrays with offsets so the hot loops run without Python object access.
Sessions own the scratch buffers, so distinct sessions can run
concurrently against one immutable CoreStack.
"""

import numpy as np

cdef enum:
    SMOOTHER_JACOBI = 0
    SMOOTHER_BLOCK = 1
    SMOOTHER_SGS = 2
    SMOOTHER_BLOCK_SGS = 3


cdef inline void csr_mv(long nrow, const int* ip, const int* ix,
                        const double* av, const double* x,
                        double* out) noexcept nogil:
    cdef long i
    cdef int j
    cdef double s
    for i in range(nrow):
        s = 0.0
        for j in range(ip[i], ip[i + 1]):
            s += av[j] * x[ix[j]]
        out[i] = s


cdef inline void dense_mv(long n, const double* a, const double* x,
                          double* out) noexcept nogil:
    cdef long i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i * n + j] * x[j]
        out[i] = s


cdef inline void block_gs_row(long t, const int* ip, const int* ix,
                              const double* av, const double* binv,
                              double* u, const double* b) noexcept nogil:
    cdef double acc0, acc1, acc2
    cdef long i, c
    cdef int j
    cdef double accs[3]
    for c in range(3):
        i = 3 * t + c
        accs[c] = b[i]
        for j in range(ip[i], ip[i + 1]):
            if ix[j] // 3 != t:
                accs[c] -= av[j] * u[ix[j]]
    acc0, acc1, acc2 = accs[0], accs[1], accs[2]
    for c in range(3):
        u[3 * t + c] = (binv[9 * t + 3 * c] * acc0
                        + binv[9 * t + 3 * c + 1] * acc1
                        + binv[9 * t + 3 * c + 2] * acc2)


cdef inline void rd_smooth_kernel(int smoother, long n, const int* ip,
                                  const int* ix, const double* av,
                                  const double* dinv, const double* diag,
                                  const double* binv, double* u,
                                  const double* b, double* r, int steps,
                                  bint backward) noexcept nogil:
    cdef long i, t
    cdef int s, j
    cdef double acc, r0, r1, r2v
    if smoother == SMOOTHER_JACOBI:
        for s in range(steps):
            csr_mv(n, ip, ix, av, u, r)
            for i in range(n):
                u[i] += dinv[i] * (b[i] - r[i])
    elif smoother == SMOOTHER_BLOCK:
        for s in range(steps):
            csr_mv(n, ip, ix, av, u, r)
            for i in range(n):
                r[i] = b[i] - r[i]
            for t in range(n // 3):
                r0 = r[3 * t]
                r1 = r[3 * t + 1]
                r2v = r[3 * t + 2]
                for j in range(3):
                    u[3 * t + j] += (binv[9 * t + 3 * j] * r0
                                     + binv[9 * t + 3 * j + 1] * r1
                                     + binv[9 * t + 3 * j + 2] * r2v)
    elif smoother == SMOOTHER_SGS:
        # symmetric Gauss-Seidel: forward pre-sweeps, backward post-sweeps
        for s in range(steps):
            if backward:
                for i in range(n - 1, -1, -1):
                    acc = b[i]
                    for j in range(ip[i], ip[i + 1]):
                        if ix[j] != i:
                            acc -= av[j] * u[ix[j]]
                    u[i] = acc / diag[i]
            else:
                for i in range(n):
                    acc = b[i]
                    for j in range(ip[i], ip[i + 1]):
                        if ix[j] != i:
                            acc -= av[j] * u[ix[j]]
                    u[i] = acc / diag[i]
    else:  # element-block symmetric Gauss-Seidel
        for s in range(steps):
            if backward:
                for t in range(n // 3 - 1, -1, -1):
                    block_gs_row(t, ip, ix, av, binv, u, b)
            else:
                for t in range(n // 3):
                    block_gs_row(t, ip, ix, av, binv, u, b)


cdef class CoreStack:
    cdef long K
    cdef int nu, cycles, smoother
    cdef long[::1] n, dof_off, dof2_off
    cdef double[::1] h2
    # reaction-diffusion CSR per level (flat)
    cdef int[::1] rd_ip, rd_ix
    cdef double[::1] rd_v
    cdef long[::1] rd_ip_off, rd_nz_off
    cdef double[::1] dinv    # omega / diag (jacobi)
    cdef double[::1] diag    # raw diagonal (gauss-seidel)
    cdef double[::1] binv    # 3x3 element block inverses, row-major (block)
    # saddle block CSR per level (2n rows)
    cdef int[::1] g_ip, g_ix
    cdef double[::1] g_v
    cdef long[::1] g_ip_off, g_nz_off
    cdef int[::1] gt_ip, gt_ix
    cdef double[::1] gt_v
    cdef long[::1] gt_ip_off, gt_nz_off
    # scalar injection CSR (rows: n_k) and its transpose (rows: n_{k-1})
    cdef int[::1] p_ip, p_ix
    cdef double[::1] p_v
    cdef long[::1] p_ip_off, p_nz_off
    cdef int[::1] pt_ip, pt_ix
    cdef double[::1] pt_v
    cdef long[::1] pt_ip_off, pt_nz_off
    cdef double[:, ::1] rd0_inv, g0_inv

    def __init__(self, long[::1] n, double[::1] h2, long[::1] dof_off,
                 long[::1] dof2_off,
                 int[::1] rd_ip, int[::1] rd_ix, double[::1] rd_v,
                 long[::1] rd_ip_off, long[::1] rd_nz_off,
                 double[::1] dinv, double[::1] diag, double[::1] binv,
                 int[::1] g_ip, int[::1] g_ix, double[::1] g_v,
                 long[::1] g_ip_off, long[::1] g_nz_off,
                 int[::1] gt_ip, int[::1] gt_ix, double[::1] gt_v,
                 long[::1] gt_ip_off, long[::1] gt_nz_off,
                 int[::1] p_ip, int[::1] p_ix, double[::1] p_v,
                 long[::1] p_ip_off, long[::1] p_nz_off,
                 int[::1] pt_ip, int[::1] pt_ix, double[::1] pt_v,
                 long[::1] pt_ip_off, long[::1] pt_nz_off,
                 double[:, ::1] rd0_inv, double[:, ::1] g0_inv,
                 int nu, int cycles, int smoother):
        self.n = n
        self.h2 = h2
        self.dof_off = dof_off
        self.dof2_off = dof2_off
        self.K = n.shape[0] - 1
        self.rd_ip, self.rd_ix, self.rd_v = rd_ip, rd_ix, rd_v
        self.rd_ip_off, self.rd_nz_off = rd_ip_off, rd_nz_off
        self.dinv, self.diag, self.binv = dinv, diag, binv
        self.g_ip, self.g_ix, self.g_v = g_ip, g_ix, g_v
        self.g_ip_off, self.g_nz_off = g_ip_off, g_nz_off
        self.gt_ip, self.gt_ix, self.gt_v = gt_ip, gt_ix, gt_v
        self.gt_ip_off, self.gt_nz_off = gt_ip_off, gt_nz_off
        self.p_ip, self.p_ix, self.p_v = p_ip, p_ix, p_v
        self.p_ip_off, self.p_nz_off = p_ip_off, p_nz_off
        self.pt_ip, self.pt_ix, self.pt_v = pt_ip, pt_ix, pt_v
        self.pt_ip_off, self.pt_nz_off = pt_ip_off, pt_nz_off
        self.rd0_inv, self.g0_inv = rd0_inv, g0_inv
        self.nu, self.cycles, self.smoother = nu, cycles, smoother


cdef class CoreSession:
    """Per-solve scratch state bound to one CoreStack."""

    cdef CoreStack S
    cdef double[::1] rd_u, rd_b, rd_r, rhs_copy
    cdef double[::1] r2, t2

    def __init__(self, CoreStack stack):
        self.S = stack
        cdef long total = stack.dof_off[stack.K + 1]
        self.rd_u = np.empty(total)
        self.rd_b = np.empty(total)
        self.rd_r = np.empty(total)
        self.rhs_copy = np.empty(total)
        cdef long total2 = stack.dof2_off[stack.K + 1]
        self.r2 = np.empty(total2)
        self.t2 = np.empty(total2)

    cdef void _rd_smooth(self, long k, double* u, const double* b,
                         int steps, bint backward):
        cdef CoreStack S = self.S
        cdef long doff = S.dof_off[k]
        cdef const double* binv = NULL
        if S.smoother == SMOOTHER_BLOCK or S.smoother == SMOOTHER_BLOCK_SGS:
            binv = &S.binv[3 * doff]
        rd_smooth_kernel(S.smoother, S.n[k],
                         &S.rd_ip[S.rd_ip_off[k]], &S.rd_ix[S.rd_nz_off[k]],
                         &S.rd_v[S.rd_nz_off[k]],
                         &S.dinv[doff], &S.diag[doff], binv,
                         u, b, &self.rd_r[doff], steps, backward)

    cdef void _rd_vcycle(self, long k):
        """V(nu, nu) cycle for the reaction-diffusion system.

        Input: the rd_b slice at level k holds the RHS.  Output: the rd_u
        slice at level k.  Lower slices are scratch.
        """
        cdef CoreStack S = self.S
        cdef long j, i, n, doff
        cdef const int* ip
        cdef const int* ix
        cdef const double* av
        for j in range(k, 0, -1):
            n = S.n[j]
            doff = S.dof_off[j]
            for i in range(n):
                self.rd_u[doff + i] = 0.0
            self._rd_smooth(j, &self.rd_u[doff], &self.rd_b[doff], S.nu, False)
            # coarse rhs = P^T (b - A u)
            ip = &S.rd_ip[S.rd_ip_off[j]]
            ix = &S.rd_ix[S.rd_nz_off[j]]
            av = &S.rd_v[S.rd_nz_off[j]]
            csr_mv(n, ip, ix, av, &self.rd_u[doff], &self.rd_r[doff])
            for i in range(n):
                self.rd_r[doff + i] = self.rd_b[doff + i] - self.rd_r[doff + i]
            csr_mv(S.n[j - 1], &S.pt_ip[S.pt_ip_off[j]],
                   &S.pt_ix[S.pt_nz_off[j]], &S.pt_v[S.pt_nz_off[j]],
                   &self.rd_r[doff], &self.rd_b[S.dof_off[j - 1]])
        dense_mv(S.n[0], &S.rd0_inv[0, 0], &self.rd_b[0], &self.rd_u[0])
        for j in range(1, k + 1):
            n = S.n[j]
            doff = S.dof_off[j]
            # u += P u_coarse, then nu post-sweeps
            csr_mv(n, &S.p_ip[S.p_ip_off[j]], &S.p_ix[S.p_nz_off[j]],
                   &S.p_v[S.p_nz_off[j]], &self.rd_u[S.dof_off[j - 1]],
                   &self.rd_r[doff])
            for i in range(n):
                self.rd_u[doff + i] += self.rd_r[doff + i]
            self._rd_smooth(j, &self.rd_u[doff], &self.rd_b[doff], S.nu, True)

    cdef void _rd_solve_into(self, long k, const double* rhs, double* out):
        """Fixed number of V(nu, nu) cycles from a zero initial guess."""
        cdef CoreStack S = self.S
        cdef long n = S.n[k]
        cdef long doff = S.dof_off[k]
        cdef long i
        cdef int c
        cdef const int* ip = &S.rd_ip[S.rd_ip_off[k]]
        cdef const int* ix = &S.rd_ix[S.rd_nz_off[k]]
        cdef const double* av = &S.rd_v[S.rd_nz_off[k]]
        for i in range(n):
            self.rd_b[doff + i] = rhs[i]
        self._rd_vcycle(k)
        for i in range(n):
            out[i] = self.rd_u[doff + i]
        for c in range(S.cycles - 1):
            csr_mv(n, ip, ix, av, out, &self.rd_r[doff])
            for i in range(n):
                self.rd_b[doff + i] = rhs[i] - self.rd_r[doff + i]
            self._rd_vcycle(k)
            for i in range(n):
                out[i] += self.rd_u[doff + i]

    # -- public entry points --------------------------------------------------

    def rd_solve(self, long k, double[::1] b):
        """Approximate reaction-diffusion inverse at level k."""
        out = np.empty(self.S.n[k])
        cdef double[::1] mv = out
        cdef long i
        cdef long n = self.S.n[k]
        # keep the caller's rhs safe from the scratch slices
        for i in range(n):
            self.rhs_copy[i] = b[i]
        self._rd_solve_into(k, &self.rhs_copy[0], &mv[0])
        return out

    def smooth(self, long k, double[::1] x, double[::1] b, double lam,
               int steps, bint post=False, bint dual=False):
        """Saddle smoothing updates in place on the pair vector x."""
        cdef CoreStack S = self.S
        cdef long n = S.n[k]
        cdef long n2 = 2 * n
        cdef long d2 = S.dof2_off[k]
        cdef double h2 = S.h2[k]
        cdef double inv_h2 = 1.0 / h2
        cdef const int* f_ip
        cdef const int* f_ix
        cdef const double* f_v
        cdef const int* a_ip
        cdef const int* a_ix
        cdef const double* a_v
        cdef double* r = &self.r2[d2]
        cdef double* t = &self.t2[d2]
        cdef long i
        cdef int s
        if dual:
            f_ip = &S.gt_ip[S.gt_ip_off[k]]
            f_ix = &S.gt_ix[S.gt_nz_off[k]]
            f_v = &S.gt_v[S.gt_nz_off[k]]
            a_ip = &S.g_ip[S.g_ip_off[k]]
            a_ix = &S.g_ix[S.g_nz_off[k]]
            a_v = &S.g_v[S.g_nz_off[k]]
        else:
            f_ip = &S.g_ip[S.g_ip_off[k]]
            f_ix = &S.g_ix[S.g_nz_off[k]]
            f_v = &S.g_v[S.g_nz_off[k]]
            a_ip = &S.gt_ip[S.gt_ip_off[k]]
            a_ix = &S.gt_ix[S.gt_nz_off[k]]
            a_v = &S.gt_v[S.gt_nz_off[k]]
        for s in range(steps):
            # r = b - (forward operator) x
            csr_mv(n2, f_ip, f_ix, f_v, &x[0], r)
            for i in range(n2):
                r[i] = b[i] - inv_h2 * r[i]
            if not post:
                # x += lam * Cinv(adjoint-op r); h2 cancels in the rhs
                csr_mv(n2, a_ip, a_ix, a_v, r, t)
                self._rd_solve_into(k, t, r)
                for i in range(n):
                    x[i] += lam * r[i]
                self._rd_solve_into(k, t + n, r)
                for i in range(n):
                    x[n + i] += lam * r[i]
            else:
                # x += lam * adjoint-op (Cinv r)
                for i in range(n2):
                    r[i] *= h2
                self._rd_solve_into(k, r, t)
                self._rd_solve_into(k, r + n, t + n)
                csr_mv(n2, a_ip, a_ix, a_v, t, r)
                for i in range(n2):
                    x[i] += lam * inv_h2 * r[i]
        return np.asarray(x)
