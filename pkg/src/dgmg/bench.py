"""Benchmark harness: contraction tables, convergence studies, file output.

The contraction number of a cycle configuration is measured on the
homogeneous problem: starting from a seeded random iterate normalized in
the energy norm, the per-cycle energy-norm reduction ratio is tracked
until it stabilizes (relative change below a tolerance over a window of
consecutive cycles), the error underflows, or a cycle cap is hit; the
reported value is the maximum of the stabilized ratios over several random
starts.  Measurements are bit-reproducible for a fixed configuration.
"""

import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import __version__
from .cycles import CycleConfig, cycle_vec, energy_norm_vec
from .errors import ConfigError
from .forms import load_vector
from .hierarchy import build_hierarchy
from .space import l2_error, error_1h

FLAG_OK = "ok"
FLAG_UNDERFLOW = "underflow"
FLAG_MAXCYCLES = "maxcycles"


@dataclass
class ExperimentConfig:
    """One table run: domain, betas, levels, smoothing counts, output."""

    domain: str = "unit_square"
    betas: tuple = (1e-2,)
    levels: int = 5
    m_values: tuple = (1, 2, 4, 8, 16, 32, 64)
    cycle: str = "W"
    sigma: float = 6.0
    seed: int = 0
    output: str = None
    format: str = "table"
    zeta: tuple = (1.0, 0.0)
    gamma: float = 0.0
    # contraction measurement protocol
    starts: int = 3
    max_cycles: int = 60
    stab_tol: float = 1e-3
    stab_window: int = 3
    floor: float = 1e-14
    # inner solver knobs
    inner_smoothing: int = 4
    inner_cycles: int = 1
    inner_smoother: str = "block_sym_gs"
    backend: str = None

    def __post_init__(self):
        if any(b <= 0 for b in self.betas):
            raise ConfigError("betas must be positive")
        if any(m < 1 for m in self.m_values):
            raise ConfigError("smoothing counts must be >= 1")
        if self.format not in ("table", "csv"):
            raise ConfigError(f"unknown output format {self.format!r}")


@dataclass
class ContractionResult:
    value: float
    cycles_used: int
    flag: str


def measure_contraction(stack, k, cfg, *, starts=3, max_cycles=60,
                        stab_tol=1e-3, stab_window=3, floor=1e-14, seed=0):
    """Asymptotic per-cycle energy-norm error reduction at level k.

    ``cfg`` is the cycle configuration (smoothing counts, W/V, variant).
    Returns the maximum stabilized ratio over the random starts together
    with the cycle count and a protocol flag.
    """
    if k < 1:
        raise ConfigError("contraction is measured on levels k >= 1")
    dual = cfg.dual
    best = 0.0
    worst_flag = FLAG_OK
    cycles_used = 0
    for start in range(starts):
        sess = stack.session()
        rng = np.random.default_rng([seed, k, start])
        x = rng.standard_normal(2 * stack.dofs(k))
        x /= energy_norm_vec(stack, k, x, sess, dual=dual)
        zero = np.zeros_like(x)
        prev = 1.0
        ratios = []
        flag = FLAG_MAXCYCLES
        for _ in range(max_cycles):
            x = cycle_vec(stack, k, zero, x, cfg, sess)
            err = energy_norm_vec(stack, k, x, sess, dual=dual)
            ratios.append(err / prev)
            prev = err
            if err < floor:
                flag = FLAG_UNDERFLOW
                break
            if len(ratios) > stab_window and all(
                    abs(ratios[-i] - ratios[-i - 1]) < stab_tol * ratios[-i]
                    for i in range(1, stab_window + 1)):
                flag = FLAG_OK
                break
        best = max(best, ratios[-1])
        cycles_used = max(cycles_used, len(ratios))
        if flag != FLAG_OK:
            order = (FLAG_OK, FLAG_MAXCYCLES, FLAG_UNDERFLOW)
            if order.index(flag) > order.index(worst_flag):
                worst_flag = flag
    return ContractionResult(value=float(best), cycles_used=cycles_used,
                             flag=worst_flag)


@dataclass
class TableResult:
    """Contraction-number grid for one (domain, beta) pair."""

    domain: str
    beta: float
    sigma: float
    cycle: str
    seed: int
    levels: list
    m_values: list
    values: np.ndarray   # (len(levels), len(m_values))
    cycles: np.ndarray
    flags: list          # nested list of str


def run_table(cfg, progress=None):
    """Measure the contraction grid for every beta in the config.

    Returns a list of TableResult; writes text or CSV when cfg.output is
    set.  Cells are measured in a deterministic order and seeded per
    (level, start), so the values do not depend on scheduling.
    """
    results = []
    for beta in cfg.betas:
        stack = build_hierarchy(
            cfg.domain, cfg.levels, beta, sigma=cfg.sigma, zeta=cfg.zeta,
            gamma=cfg.gamma, inner_smoothing=cfg.inner_smoothing,
            inner_cycles=cfg.inner_cycles, inner_smoother=cfg.inner_smoother,
            seed=cfg.seed, backend=cfg.backend)
        levels = list(range(1, cfg.levels + 1))
        values = np.zeros((len(levels), len(cfg.m_values)))
        cycles = np.zeros_like(values, dtype=int)
        flags = [[FLAG_OK] * len(cfg.m_values) for _ in levels]
        for i, k in enumerate(levels):
            for j, m in enumerate(cfg.m_values):
                t0 = time.time()
                res = measure_contraction(
                    stack, k, CycleConfig(m1=m, m2=m, cycle=cfg.cycle),
                    starts=cfg.starts, max_cycles=cfg.max_cycles,
                    stab_tol=cfg.stab_tol, stab_window=cfg.stab_window,
                    floor=cfg.floor, seed=cfg.seed)
                values[i, j] = res.value
                cycles[i, j] = res.cycles_used
                flags[i][j] = res.flag
                if progress is not None:
                    progress(beta, k, m, res, time.time() - t0)
        results.append(TableResult(
            domain=cfg.domain, beta=beta, sigma=cfg.sigma, cycle=cfg.cycle,
            seed=cfg.seed, levels=levels, m_values=list(cfg.m_values),
            values=values, cycles=cycles, flags=flags))
    if cfg.output:
        with open(cfg.output, "w") as fh:
            if cfg.format == "csv":
                write_csv(results, fh)
            else:
                for t in results:
                    fh.write(format_table(t))
                    fh.write("\n")
    return results


def format_table(t):
    """Aligned text table in the usual layout: rows k, columns m."""
    out = io.StringIO()
    out.write(f"# domain={t.domain} beta={t.beta:.1e} sigma={t.sigma:g} "
              f"cycle={t.cycle} seed={t.seed} dgmg {__version__}\n")
    out.write("k\\m " + "".join(f"{m:>10d}" for m in t.m_values) + "\n")
    for i, k in enumerate(t.levels):
        row = "".join(f"  {t.values[i, j]:.2e}" for j in range(len(t.m_values)))
        out.write(f"{k:<4d}{row}\n")
    return out.getvalue()


CSV_HEADER = "domain,beta,sigma,cycle,k,m,contraction,cycles_used,flag"


def write_csv(results, stream):
    close = False
    if isinstance(stream, (str, bytes)):
        stream = open(stream, "w")
        close = True
    try:
        first = results[0]
        stream.write(f"# dgmg {__version__} seed={first.seed}\n")
        stream.write(CSV_HEADER + "\n")
        for t in results:
            for i, k in enumerate(t.levels):
                for j, m in enumerate(t.m_values):
                    stream.write(
                        f"{t.domain},{float(t.beta)!r},{float(t.sigma)!r},{t.cycle},{k},{m},"
                        f"{float(t.values[i, j])!r},{t.cycles[i, j]},{t.flags[i][j]}\n")
    finally:
        if close:
            stream.close()


def read_csv(stream):
    """Parse a contraction CSV back into TableResult objects (round trip
    of :func:`write_csv`)."""
    close = False
    if isinstance(stream, (str, bytes)):
        stream = open(stream)
        close = True
    try:
        rows = []
        seed = 0
        for line in stream:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tokenized in line[1:].split():
                    if tokenized.startswith("seed="):
                        seed = int(tokenized[5:])
                continue
            if line == CSV_HEADER:
                continue
            dom, beta, sigma, cyc, k, m, val, used, flag = line.split(",")
            rows.append((dom, float(beta), float(sigma), cyc, int(k), int(m),
                         float(val), int(used), flag))
    finally:
        if close:
            stream.close()

    results = []
    keys = []
    for row in rows:
        key = row[:4]
        if key not in keys:
            keys.append(key)
    for key in keys:
        sel = [r for r in rows if r[:4] == key]
        levels = sorted({r[4] for r in sel})
        m_values = sorted({r[5] for r in sel})
        values = np.zeros((len(levels), len(m_values)))
        cycles = np.zeros_like(values, dtype=int)
        flags = [[FLAG_OK] * len(m_values) for _ in levels]
        for r in sel:
            i, j = levels.index(r[4]), m_values.index(r[5])
            values[i, j] = r[6]
            cycles[i, j] = r[7]
            flags[i][j] = r[8]
        results.append(TableResult(domain=key[0], beta=key[1], sigma=key[2],
                                   cycle=key[3], seed=seed, levels=levels,
                                   m_values=m_values, values=values,
                                   cycles=cycles, flags=flags))
    return results


# -- manufactured-solution convergence study -----------------------------------

def _manufactured(beta):
    """Smooth zero-trace exact pair and the matching strong-form data for
    the benchmark coefficients (velocity (1, 0), no reaction)."""
    sb = np.sqrt(beta)
    pi = np.pi

    def sol(p):
        return np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1])

    def grad_sol(p):
        sx, cx = np.sin(pi * p[:, 0]), np.cos(pi * p[:, 0])
        sy, cy = np.sin(pi * p[:, 1]), np.cos(pi * p[:, 1])
        return np.stack([pi * cx * sy, pi * sx * cy], axis=-1)

    def f_fun(p):
        s = sol(p)
        dx = np.pi * np.cos(pi * p[:, 0]) * np.sin(pi * p[:, 1])
        # f = sqrt(beta) (-lap s - d/dx s) - s
        return sb * (2 * pi ** 2 * s - dx) - s

    def g_fun(p):
        s = sol(p)
        dx = np.pi * np.cos(pi * p[:, 0]) * np.sin(pi * p[:, 1])
        # g = -s - sqrt(beta) (-lap s + d/dx s)
        return -s - sb * (2 * pi ** 2 * s + dx)

    return sol, grad_sol, f_fun, g_fun


@dataclass
class RatesResult:
    domain: str
    beta: float
    levels: list
    h: list
    err_l2: list
    err_1h: list
    ratios_l2: list = field(default_factory=list)
    ratios_1h: list = field(default_factory=list)
    order_l2: float = 0.0
    order_1h: float = 0.0

    def __post_init__(self):
        self.ratios_l2 = [self.err_l2[i] / self.err_l2[i + 1]
                          for i in range(len(self.err_l2) - 1)]
        self.ratios_1h = [self.err_1h[i] / self.err_1h[i + 1]
                          for i in range(len(self.err_1h) - 1)]
        # observed order: mean rate over the finest level pairs, where the
        # asymptotic regime has set in
        tail = min(2, len(self.ratios_l2))
        self.order_l2 = float(np.mean(np.log2(self.ratios_l2[-tail:])))
        self.order_1h = float(np.mean(np.log2(self.ratios_1h[-tail:])))


def convergence_study(domain, beta, max_level, sigma=6.0, zeta=(1.0, 0.0),
                      gamma=0.0):
    """Direct-solve error-convergence study against the manufactured
    sin-product solution; reports L2 and 1,h errors per level with
    successive ratios."""
    if tuple(np.atleast_1d(zeta)) != (1.0, 0.0) or gamma != 0.0:
        raise ConfigError("the manufactured data is derived for "
                          "zeta=(1,0), gamma=0")
    sol, grad_sol, f_fun, g_fun = _manufactured(beta)
    stack = build_hierarchy(domain, max_level, beta, sigma=sigma, zeta=zeta,
                            gamma=gamma)
    levels, hs, err_l2, err_1h = [], [], [], []
    for k in range(1, max_level + 1):
        space = stack.space(k)
        G = stack.levels[k].saddle.block
        b = np.concatenate([load_vector(space, f_fun), load_vector(space, g_fun)])
        x = spla.spsolve(G.tocsc(), b)
        n = space.dof_count
        from .space import ScalarField
        p = ScalarField(space, x[:n])
        y = ScalarField(space, x[n:])
        e_l2 = np.sqrt(l2_error(p, sol) ** 2 + l2_error(y, sol) ** 2)
        e_1h = np.sqrt(error_1h(p, sol, grad_sol) ** 2
                       + error_1h(y, sol, grad_sol) ** 2)
        levels.append(k)
        hs.append(space.h)
        err_l2.append(float(e_l2))
        err_1h.append(float(e_1h))
    return RatesResult(domain=domain, beta=beta, levels=levels, h=hs,
                       err_l2=err_l2, err_1h=err_1h)


def format_rates(r):
    out = io.StringIO()
    out.write(f"# domain={r.domain} beta={r.beta:.1e} dgmg {__version__}\n")
    out.write(f"{'k':>2} {'h':>10} {'L2 error':>12} {'ratio':>8} "
              f"{'1h error':>12} {'ratio':>8}\n")
    for i, k in enumerate(r.levels):
        rl = f"{r.ratios_l2[i - 1]:8.2f}" if i else " " * 8
        rh = f"{r.ratios_1h[i - 1]:8.2f}" if i else " " * 8
        out.write(f"{k:>2} {r.h[i]:10.4e} {r.err_l2[i]:12.4e} {rl} "
                  f"{r.err_1h[i]:12.4e} {rh}\n")
    out.write(f"# observed orders: L2 {r.order_l2:.2f}, 1h {r.order_1h:.2f}\n")
    return out.getvalue()


# -- backend benchmark ----------------------------------------------------------

def benchmark_backends(domain="unit_square", levels=4, beta=1e-2, m=8,
                       repeats=3, seed=0):
    """Time the hot kernels on every available backend (the repo ships a
    compiled core and a pure-Python fallback).  Returns rows of
    (backend, kernel, seconds-per-call)."""
    from .backend import available_backends
    rows = []
    for name in available_backends():
        stack = build_hierarchy(domain, levels, beta, seed=seed, backend=name)
        sess = stack.session()
        k = stack.max_level
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(2 * stack.dofs(k))
        b = np.zeros_like(x)
        phi = rng.standard_normal(stack.dofs(k))

        t0 = time.perf_counter()
        for _ in range(repeats):
            sess.rd_solve(k, phi)
        rows.append((name, "inner V-cycle", (time.perf_counter() - t0) / repeats))

        t0 = time.perf_counter()
        for _ in range(repeats):
            sess.smooth(k, x.copy(), b, stack.lam[k], m, post=False)
        rows.append((name, f"{m} smoothing steps",
                     (time.perf_counter() - t0) / repeats))

        cfg = CycleConfig(m1=m, m2=m, cycle="W")
        t0 = time.perf_counter()
        for _ in range(repeats):
            cycle_vec(stack, k, b, x, cfg, sess)
        rows.append((name, "W-cycle", (time.perf_counter() - t0) / repeats))
    return rows


def format_benchmark(rows):
    out = io.StringIO()
    out.write(f"{'backend':<10} {'kernel':<20} {'sec/call':>12}\n")
    for name, kernel, sec in rows:
        out.write(f"{name:<10} {kernel:<20} {sec:>12.6f}\n")
    base = {}
    for name, kernel, sec in rows:
        base.setdefault(kernel, {})[name] = sec
    for kernel, by in base.items():
        if "compiled" in by and "python" in by:
            out.write(f"# speedup {kernel}: x{by['python'] / by['compiled']:.1f}\n")
    return out.getvalue()
