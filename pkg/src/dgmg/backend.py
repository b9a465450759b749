"""Kernel backend selection: compiled extension core or pure-Python fallback.

The smoothing iterations and the inner reaction-diffusion V-cycles dominate
solver runtime.  Both are implemented twice with identical arithmetic: a
Cython extension (``dgmg._core``) and a scipy-based fallback
(``dgmg._pycore``).  The compiled core is used when importable; set
``DGMG_BACKEND=python`` or ``DGMG_BACKEND=compiled`` to force a choice.

A backend *session* bundles the per-solve scratch state; distinct sessions
may run concurrently against one immutable kernel-data object.
"""

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError

try:
    from . import _core
except ImportError:  # pragma: no cover - exercised via DGMG_BACKEND=python
    _core = None

SMOOTHERS = ("jacobi", "block_jacobi", "sym_gs", "block_sym_gs")
_SMOOTHER_CODES = {name: i for i, name in enumerate(SMOOTHERS)}
_BLOCK_SMOOTHERS = ("block_jacobi", "block_sym_gs")


@dataclass
class LevelKernelData:
    n: int
    h2: float
    rd: sp.csr_matrix          # sqrt(beta) * A_sip + M
    rd_diag: np.ndarray
    rd_dinv: np.ndarray        # damped-Jacobi diagonal: omega / diag(rd)
    rd_binv: np.ndarray        # element 3x3 diagonal-block inverses
    G: sp.csr_matrix           # saddle Galerkin block matrix (2n x 2n)
    GT: sp.csr_matrix
    P: object                  # scalar injection from level k-1 (None at 0)
    PT: object


@dataclass
class KernelData:
    levels: list
    rd0_inv: np.ndarray        # dense inverse of the level-0 rd matrix
    g0_inv: np.ndarray         # dense inverse of the level-0 saddle block
    nu: int                    # inner V(nu, nu) smoothing steps
    inner_cycles: int
    smoother: str
    omegas: np.ndarray         # per-level Jacobi damping weights


def _jacobi_spectral_radius(A, diag, seed=0, iters=80, tol=1e-3):
    """Power-iteration estimate of rho(diag(A)^{-1} A)."""
    n = A.shape[0]
    if n == 1:
        return 1.0
    rng = np.random.default_rng([seed, n, 17])
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    rho = 1.0
    for _ in range(iters):
        z = A @ v
        new = float(v @ z) / float(v @ (diag * v))
        z /= diag
        nz = np.linalg.norm(z)
        if nz == 0.0:
            break
        v = z / nz
        if abs(new - rho) <= tol * abs(new):
            rho = new
            break
        rho = new
    return abs(rho)


def _diagonal_block_inverses(A):
    """Inverses of the 3x3 element-diagonal blocks of a DG matrix."""
    bsr = A.tobsr(blocksize=(3, 3))
    nb = A.shape[0] // 3
    blocks = np.zeros((nb, 3, 3))
    for row in range(nb):
        for idx in range(bsr.indptr[row], bsr.indptr[row + 1]):
            if bsr.indices[idx] == row:
                blocks[row] = bsr.data[idx]
                break
    return np.linalg.inv(blocks)


def make_kernel_data(ops_list, saddle_list, injections, nu=4, inner_cycles=1,
                     smoother="block_sym_gs", seed=0):
    """Pack assembled level operators into the backend-neutral kernel data."""
    if smoother not in SMOOTHERS:
        raise ConfigError(f"unknown inner smoother {smoother!r}; "
                          f"expected one of {SMOOTHERS}")
    beta = ops_list[0].beta
    sb = np.sqrt(beta)
    levels = []
    omegas = []
    for k, (ops, saddle) in enumerate(zip(ops_list, saddle_list)):
        rd = (sb * ops.A_sip + ops.M).tocsr()
        rd.sort_indices()
        diag = rd.diagonal()
        omega = 2.0 / (3.0 * _jacobi_spectral_radius(rd, diag, seed=seed))
        omegas.append(omega)
        P = injections[k] if k > 0 else None
        levels.append(LevelKernelData(
            n=ops.space.dof_count,
            h2=ops.h2,
            rd=rd,
            rd_diag=diag,
            rd_dinv=omega / diag,
            rd_binv=(_diagonal_block_inverses(rd)
                     if smoother in _BLOCK_SMOOTHERS else np.zeros((0, 3, 3))),
            G=saddle.block,
            GT=saddle.block_t,
            P=P,
            PT=P.T.tocsr() if P is not None else None,
        ))
    rd0_inv = np.linalg.inv(levels[0].rd.toarray())
    g0_inv = np.linalg.inv(levels[0].G.toarray())
    return KernelData(levels=levels, rd0_inv=rd0_inv, g0_inv=g0_inv,
                      nu=nu, inner_cycles=inner_cycles, smoother=smoother,
                      omegas=np.array(omegas))


class Kernels:
    """Facade over one backend bound to one hierarchy's kernel data."""

    def __init__(self, data, name):
        self.data = data
        self.name = name
        if name == "compiled":
            self._core_stack = _pack_core_stack(data)
        else:
            self._core_stack = None

    def session(self):
        if self.name == "compiled":
            return _core.CoreSession(self._core_stack)
        from ._pycore import PySession
        return PySession(self.data)


def _pack_core_stack(data):
    """Flatten per-level CSR matrices into the compiled core's layout."""
    def pack_csr(mats):
        indptr, indices, values = [], [], []
        ip_off, nz_off = [0], [0]
        for m in mats:
            if m is None:
                ip_off.append(ip_off[-1])
                nz_off.append(nz_off[-1])
                continue
            indptr.append(m.indptr.astype(np.int32))
            indices.append(m.indices.astype(np.int32))
            values.append(m.data.astype(np.float64))
            ip_off.append(ip_off[-1] + len(m.indptr))
            nz_off.append(nz_off[-1] + m.nnz)
        cat = lambda parts, dt: (np.concatenate(parts).astype(dt) if parts
                                 else np.zeros(0, dtype=dt))
        return (cat(indptr, np.int32), cat(indices, np.int32),
                cat(values, np.float64),
                np.asarray(ip_off, dtype=np.int64),
                np.asarray(nz_off, dtype=np.int64))

    lv = data.levels
    n = np.array([L.n for L in lv], dtype=np.int64)
    h2 = np.array([L.h2 for L in lv])
    dof_off = np.concatenate([[0], np.cumsum(n)]).astype(np.int64)
    dof2_off = 2 * dof_off

    rd = pack_csr([L.rd for L in lv])
    G = pack_csr([L.G for L in lv])
    GT = pack_csr([L.GT for L in lv])
    P = pack_csr([L.P for L in lv])
    PT = pack_csr([L.PT for L in lv])
    dinv = np.concatenate([L.rd_dinv for L in lv])
    diag = np.concatenate([L.rd_diag for L in lv])
    if data.smoother in _BLOCK_SMOOTHERS:
        binv = np.concatenate([np.ascontiguousarray(L.rd_binv).reshape(-1)
                               for L in lv])
    else:
        binv = np.zeros(1)

    return _core.CoreStack(
        n, h2, dof_off, dof2_off,
        *rd, dinv, diag, binv,
        *G, *GT, *P, *PT,
        np.ascontiguousarray(data.rd0_inv),
        np.ascontiguousarray(data.g0_inv),
        data.nu, data.inner_cycles, _SMOOTHER_CODES[data.smoother],
    )


def available_backends():
    names = ["python"]
    if _core is not None:
        names.insert(0, "compiled")
    return names


def make_kernels(data, name=None):
    if name is None:
        name = os.environ.get("DGMG_BACKEND")
    if name is None:
        name = "compiled" if _core is not None else "python"
    if name not in ("compiled", "python"):
        raise ConfigError(f"unknown backend {name!r}")
    if name == "compiled" and _core is None:
        raise ConfigError("compiled backend requested but dgmg._core is not built")
    return Kernels(data, name)
