import numpy as np
import pytest

from conftest import rng_for
from dgmg.backend import available_backends
from dgmg.bench import benchmark_backends, format_benchmark
from dgmg.cycles import CycleConfig, cycle_vec
from dgmg.errors import ConfigError
from dgmg.hierarchy import build_hierarchy

needs_compiled = pytest.mark.skipif("compiled" not in available_backends(),
                                    reason="compiled core not built")

SMOOTHERS = ("jacobi", "block_jacobi", "sym_gs", "block_sym_gs")


@needs_compiled
@pytest.mark.parametrize("smoother", SMOOTHERS)
def test_backends_agree(smoother):
    stacks = {
        name: build_hierarchy("unit_square", 3, beta=1e-2, seed=0,
                              inner_smoother=smoother, backend=name)
        for name in ("compiled", "python")
    }
    rng = rng_for(81)
    k = 3
    n2 = 2 * stacks["compiled"].dofs(k)
    b = rng.standard_normal(n2)
    x0 = rng.standard_normal(n2)
    phi = rng.standard_normal(stacks["compiled"].dofs(k))

    # damping factors built from each backend's own eigenvalue sweep
    assert np.abs(stacks["compiled"].lam - stacks["python"].lam).max() < 1e-10

    outs = {}
    for name, stack in stacks.items():
        sess = stack.session()
        rd = sess.rd_solve(k, phi.copy())
        cyc = cycle_vec(stack, k, b, x0.copy(),
                        CycleConfig(m1=3, m2=2, cycle="W"), sess)
        dual = cycle_vec(stack, k, b, x0.copy(),
                         CycleConfig(m1=2, m2=2, cycle="V", variant="dual"),
                         sess)
        outs[name] = (rd, cyc, dual)
    for a, b_ in zip(outs["compiled"], outs["python"]):
        assert np.abs(a - b_).max() < 1e-10 * max(np.abs(b_).max(), 1.0)


@needs_compiled
def test_sessions_are_independent():
    stack = build_hierarchy("unit_square", 2, beta=1e-2, seed=0,
                            backend="compiled")
    rng = rng_for(82)
    k = 2
    b = rng.standard_normal(2 * stack.dofs(k))
    s1, s2 = stack.session(), stack.session()
    cfg = CycleConfig(m1=2, m2=2)
    x1 = cycle_vec(stack, k, b, np.zeros_like(b), cfg, s1)
    # interleave a different computation on the second session
    cycle_vec(stack, k, 2.0 * b, np.zeros_like(b), cfg, s2)
    x1_again = cycle_vec(stack, k, b, np.zeros_like(b), cfg, s1)
    assert np.array_equal(x1, x1_again)


def test_backend_forcing():
    stack = build_hierarchy("unit_square", 1, beta=1e-2, backend="python")
    assert stack.kernels.name == "python"
    with pytest.raises(ConfigError):
        build_hierarchy("unit_square", 1, beta=1e-2, backend="fortran")


def test_unknown_smoother():
    with pytest.raises(ConfigError):
        build_hierarchy("unit_square", 1, beta=1e-2, inner_smoother="ilu")


def test_benchmark_rows():
    rows = benchmark_backends(levels=2, beta=1e-2, m=2, repeats=1)
    names = {r[0] for r in rows}
    assert "python" in names
    text = format_benchmark(rows)
    assert "W-cycle" in text
    if "compiled" in names:
        assert "speedup" in text
