"""W-cycle and V-cycle solvers for the saddle system and their duals.

One call to :func:`mg_solve` performs a single cycle; callers iterate.
The smoothers are damped Richardson updates built from the block
preconditioner and the saddle operator: pre-smoothing applies the
preconditioner-then-transpose composition, post-smoothing the transpose-
then-preconditioner composition, and the dual algorithms interchange the
operator with its transpose throughout.  The damping factor switches
between an eigenvalue-matched Richardson weight on well-conditioned coarse
levels and an O((sqrt(beta) h^-2 + 1)^-1) weight on fine levels.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .space import PairField


@dataclass
class CycleConfig:
    """Smoothing counts, cycle type and variant for one solver setup."""

    m1: int = 1
    m2: int = 1
    cycle: str = "W"
    variant: str = "primal"
    coarse_solver: str = "direct"
    damping_constant_C: float = 1.0
    max_power_iters: int = 200
    power_tol: float = 1e-6

    def __post_init__(self):
        self.cycle = self.cycle.upper()
        if self.cycle not in ("W", "V"):
            raise ConfigError(f"cycle must be 'W' or 'V', got {self.cycle!r}")
        if self.variant not in ("primal", "dual"):
            raise ConfigError(f"variant must be 'primal' or 'dual', got {self.variant!r}")
        if self.coarse_solver != "direct":
            raise ConfigError("only the direct coarse solver is supported")
        if self.m1 < 0 or self.m2 < 0 or (self.m1 == 0 and self.m2 == 0):
            raise ConfigError("need m1, m2 >= 0 and not both zero")

    @property
    def dual(self):
        return self.variant == "dual"


@dataclass
class EigEstimate:
    """Power-iteration estimates of the extreme eigenvalues of the
    preconditioned normal operator on one level."""

    lambda_min: float
    lambda_max: float
    level: int
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        if not (0.0 < self.lambda_min <= self.lambda_max):
            raise ContractError(
                f"invalid eigenvalue estimates: {self.lambda_min}, {self.lambda_max}")


@dataclass
class SolveInfo:
    cycles: int
    rel_residual: float
    converged: bool


# -- operator compositions ----------------------------------------------------

def _pair_inverse_vec(stack, k, v, sess):
    """Blockwise approximate inverse of the preconditioner on a pair vector."""
    n = stack.dofs(k)
    h2 = stack.h2(k)
    return np.concatenate([sess.rd_solve(k, h2 * v[:n]),
                           sess.rd_solve(k, h2 * v[n:])])


def _normal_apply_vec(stack, k, v, sess, dual=False):
    """Apply the SPD composition transpose . inverse-preconditioner . operator
    (or its dual-order counterpart)."""
    w = stack.apply_saddle_vec(k, v, dual=dual)
    w = _pair_inverse_vec(stack, k, w, sess)
    return stack.apply_saddle_vec(k, w, dual=not dual)


def energy_norm_vec(stack, k, x, sess, dual=False):
    w = stack.apply_saddle_vec(k, x, dual=dual)
    cw = _pair_inverse_vec(stack, k, w, sess)
    val = stack.pair_inner_vec(k, cw, w)
    return float(np.sqrt(max(val, 0.0)))


def energy_norm(stack, k, x):
    """Energy norm sqrt([B^t C^-1 B x, x]_k) of a pair field."""
    if x.space is not stack.space(k):
        raise ContractError("pair does not live on level k")
    return energy_norm_vec(stack, k, x.to_vector(), stack.session())


def energy_norm_dual(stack, k, x):
    """Dual energy norm sqrt([B C^-1 B^t x, x]_k)."""
    if x.space is not stack.space(k):
        raise ContractError("pair does not live on level k")
    return energy_norm_vec(stack, k, x.to_vector(), stack.session(), dual=True)


def pair_norm(stack, k, x):
    """Mesh-dependent norm sqrt([x, x]_k) of a pair field."""
    v = x.to_vector()
    return float(np.sqrt(stack.pair_inner_vec(k, v, v)))


# -- eigenvalue estimation and damping ----------------------------------------

def _power_iteration(apply_fn, v0, max_iters, tol):
    v = v0 / np.linalg.norm(v0)
    ray = 0.0
    for it in range(1, max_iters + 1):
        z = apply_fn(v)
        new = float(v @ z)  # Rayleigh quotient (v normalized)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0, it, True
        converged = abs(new - ray) <= tol * abs(new)
        ray = new
        v = z / nz
        if converged:
            return ray, it, True
    return ray, max_iters, False


def estimate_extreme_eigs(stack, k, max_iters=200, tol=1e-6, seed=0):
    """Estimate the extreme eigenvalues of the preconditioned normal
    operator by power iteration (largest directly, smallest via the
    spectral shift by the largest estimate)."""
    sess = stack.session()
    n2 = 2 * stack.dofs(k)
    rng = np.random.default_rng([seed, k, 101])
    v0 = rng.standard_normal(n2)

    t_apply = lambda v: _normal_apply_vec(stack, k, v, sess)
    lam_max, it1, ok1 = _power_iteration(t_apply, v0, max_iters, tol)

    shifted = lambda v: lam_max * v - t_apply(v)
    mu, it2, ok2 = _power_iteration(shifted, rng.standard_normal(n2),
                                    max_iters, tol)
    lam_min = lam_max - mu
    lam_min = max(lam_min, 1e-14 * lam_max)

    # Non-convergence is recorded on the estimate rather than raised: the
    # shifted iteration is slow when the operator is ill-conditioned, and
    # the smallest eigenvalue is only consumed on well-conditioned levels.
    return EigEstimate(lambda_min=lam_min, lambda_max=lam_max, level=k,
                       converged=ok1 and ok2, iterations=it1 + it2)


def damping_factor(stack, k, eig, damping_constant=1.0):
    """Damping weight for the Richardson smoothers.

    Both regimes use the optimal Richardson weight
    2 / (lambda_min + lambda_max); on fine levels
    (sqrt(beta) h^-2 >= 1) it is additionally capped by
    damping_constant / (sqrt(beta) h^-2 + 1), preserving the
    O((sqrt(beta) h^-2 + 1)^-1) scaling of the smoothing analysis.  The
    weight keeps the damped normal operator non-expansive
    (lambda * lambda_max < 2, so |1 - lambda mu| < 1 on the whole
    spectrum); the tighter calibration lambda * lambda_max <= 1 damps the
    spectrum top harder but starves the mid-spectrum modes that the
    V-cycle's single coarse pass leaves behind, and measurably breaks
    V-cycle robustness on fine levels.
    """
    h2 = stack.h2(k)
    stiffness = np.sqrt(stack.beta) / h2
    richardson = 2.0 / (eig.lambda_min + eig.lambda_max)
    if stiffness >= 1.0:
        return min(richardson, damping_constant / (stiffness + 1.0))
    return richardson


# -- smoothers -----------------------------------------------------------------

def _check_level(stack, k, x):
    if x.space is not stack.space(k):
        raise ContractError("pair does not live on level k")


def smooth_pre(stack, k, x, b, lambda_k, steps, variant="primal"):
    """Pre-smoothing: x + lambda * C^-1 B^t (b - B x), `steps` times."""
    _check_level(stack, k, x)
    _check_level(stack, k, b)
    vec = x.to_vector()
    stack.session().smooth(k, vec, b.to_vector(), lambda_k, steps,
                           post=False, dual=(variant == "dual"))
    return PairField.from_vector(stack.space(k), vec)


def smooth_post(stack, k, x, b, lambda_k, steps, variant="primal"):
    """Post-smoothing: x + lambda * B^t C^-1 (b - B x), `steps` times."""
    _check_level(stack, k, x)
    _check_level(stack, k, b)
    vec = x.to_vector()
    stack.session().smooth(k, vec, b.to_vector(), lambda_k, steps,
                           post=True, dual=(variant == "dual"))
    return PairField.from_vector(stack.space(k), vec)


# -- cycles ---------------------------------------------------------------------

def cycle_vec(stack, k, b, x0, cfg, sess):
    """One multigrid cycle on raw pair vectors (the hot path)."""
    if k == 0:
        return stack.coarse_solve_vec(b, dual=cfg.dual)
    x = np.array(x0, dtype=np.float64)
    lam = stack.lam[k]
    sess.smooth(k, x, b, lam, cfg.m1, post=False, dual=cfg.dual)
    r = b - stack.apply_saddle_vec(k, x, dual=cfg.dual)
    bc = stack.restrict_vec(k, r)
    c = cycle_vec(stack, k - 1, bc, np.zeros_like(bc), cfg, sess)
    if cfg.cycle == "W":
        c = cycle_vec(stack, k - 1, bc, c, cfg, sess)
    x += stack.inject_vec(k, c)
    sess.smooth(k, x, b, lam, cfg.m2, post=True, dual=cfg.dual)
    return x


def mg_solve(stack, k, b, x0, cfg):
    """One W- or V-cycle for the level-k saddle problem (direct solve at
    level 0).  Returns the new iterate; callers iterate to convergence."""
    _check_level(stack, k, b)
    _check_level(stack, k, x0)
    vec = cycle_vec(stack, k, b.to_vector(), x0.to_vector(), cfg,
                    stack.session())
    return PairField.from_vector(stack.space(k), vec)


def mg_iterate(stack, k, b, cfg, x0=None, rel_tol=1e-10, max_cycles=100):
    """Iterate cycles until the mesh-norm relative residual drops below
    rel_tol (or the cycle cap is hit)."""
    _check_level(stack, k, b)
    sess = stack.session()
    bvec = b.to_vector()
    x = np.zeros_like(bvec) if x0 is None else x0.to_vector().copy()
    bnorm = np.sqrt(stack.pair_inner_vec(k, bvec, bvec))
    if bnorm == 0.0:
        bnorm = 1.0
    rel = np.inf
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        x = cycle_vec(stack, k, bvec, x, cfg, sess)
        r = bvec - stack.apply_saddle_vec(k, x, dual=cfg.dual)
        rel = np.sqrt(stack.pair_inner_vec(k, r, r)) / bnorm
        if rel < rel_tol:
            break
    info = SolveInfo(cycles=cycles, rel_residual=float(rel),
                     converged=rel < rel_tol)
    return PairField.from_vector(stack.space(k), x), info
