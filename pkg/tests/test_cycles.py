import numpy as np
import pytest
import scipy.sparse.linalg as spla

from conftest import rng_for
from dgmg.cycles import (CycleConfig, cycle_vec, damping_factor,
                         energy_norm, energy_norm_dual, energy_norm_vec,
                         estimate_extreme_eigs, mg_iterate, mg_solve,
                         pair_norm, smooth_post, smooth_pre)
from dgmg.errors import ConfigError
from dgmg.space import PairField, l2_norm


def rand_pair(stack, k, seed):
    rng = rng_for(41, k, seed)
    return PairField.from_vector(stack.space(k),
                                 rng.standard_normal(2 * stack.dofs(k)))


def test_cycle_config_validation():
    with pytest.raises(ConfigError):
        CycleConfig(m1=0, m2=0)
    with pytest.raises(ConfigError):
        CycleConfig(cycle="X")
    with pytest.raises(ConfigError):
        CycleConfig(variant="adjoint")
    with pytest.raises(ConfigError):
        CycleConfig(coarse_solver="amg")
    cfg = CycleConfig(m1=2, m2=0, cycle="w")
    assert cfg.cycle == "W" and not cfg.dual


def test_eig_estimates_match_dense_oracle(square_stack):
    """Level-0 system is 12x12: compare against a dense eigensolve."""
    stack = square_stack
    sess = stack.session()
    n2 = 2 * stack.dofs(0)
    T = np.zeros((n2, n2))
    from dgmg.cycles import _normal_apply_vec
    for i in range(n2):
        e = np.zeros(n2)
        e[i] = 1.0
        T[:, i] = _normal_apply_vec(stack, 0, e, sess)
    w = np.linalg.eigvalsh(0.5 * (T + T.T))
    est = estimate_extreme_eigs(stack, 0, seed=0)
    assert est.lambda_max == pytest.approx(w.max(), rel=1e-4)
    assert est.lambda_min == pytest.approx(w.min(), rel=1e-4)
    assert est.converged


def test_eig_estimates_positive(square_stack, square_stack_beta4):
    for stack in (square_stack, square_stack_beta4):
        for e in stack.eigs:
            assert 0.0 < e.lambda_min <= e.lambda_max


def test_damping_factor_branches(square_stack):
    stack = square_stack
    # coarse branch: the optimal Richardson weight
    from dgmg.cycles import EigEstimate
    eig = EigEstimate(lambda_min=0.5, lambda_max=1.5, level=1)
    assert damping_factor(stack, 1, eig) == pytest.approx(1.0)
    # fine branch at beta=1e-2, h = sqrt(2)/2^3 on level 3
    stiff = np.sqrt(stack.beta) / stack.h2(3)
    assert stiff >= 1.0
    e3 = stack.eigs[3]
    expected = min(2.0 / (e3.lambda_min + e3.lambda_max), 1.0 / (stiff + 1.0))
    assert stack.lam[3] == pytest.approx(expected)
    # non-expansive damped spectrum: lam * lambda_max < 2
    for k in range(stack.num_levels):
        assert stack.lam[k] * stack.eigs[k].lambda_max < 2.0


def test_smoothers_fix_exact_solution(square_stack):
    stack = square_stack
    k = 2
    xs = rand_pair(stack, k, 0)
    b = stack.levels[k].saddle.apply(xs)
    for smoother in (smooth_pre, smooth_post):
        out = smoother(stack, k, xs, b, stack.lam[k], 3)
        err = np.abs(out.to_vector() - xs.to_vector()).max()
        assert err < 1e-12 * np.abs(xs.to_vector()).max()


def test_single_step_matches_composition(square_stack):
    """One smoothing step from zero equals the hand-composed operator
    chain built from the preconditioner and saddle operators."""
    stack = square_stack
    k = 2
    lam = stack.lam[k]
    b = rand_pair(stack, k, 1)
    zero = PairField.zeros(stack.space(k))
    pc = stack.levels[k].precond

    got = smooth_pre(stack, k, zero, b, lam, 1).to_vector()
    want = lam * pc.apply_pair_inverse_vec(
        stack.apply_saddle_vec(k, b.to_vector(), dual=True))
    assert np.abs(got - want).max() < 1e-12 * np.abs(want).max()

    got = smooth_post(stack, k, zero, b, lam, 1).to_vector()
    want = lam * stack.apply_saddle_vec(
        k, pc.apply_pair_inverse_vec(b.to_vector()), dual=True)
    assert np.abs(got - want).max() < 1e-12 * np.abs(want).max()


def test_smoothing_error_monotone(square_stack):
    """Energy error is non-increasing along pre-smoothing steps (and dual
    error along dual steps)."""
    stack = square_stack
    k = 2
    rng = rng_for(42)
    sess = stack.session()
    xs = rand_pair(stack, k, 3)
    b = stack.levels[k].saddle.apply(xs)
    x = rand_pair(stack, k, 4).to_vector()
    prev = energy_norm_vec(stack, k, x - xs.to_vector(), sess)
    for _ in range(10):
        sess.smooth(k, x, b.to_vector(), stack.lam[k], 1, post=False)
        err = energy_norm_vec(stack, k, x - xs.to_vector(), sess)
        assert err <= prev * (1.0 + 1e-12)
        prev = err


def test_post_smoothing_is_richardson(square_stack):
    """Iterating the post-smoother alone solves the preconditioned normal
    equations (level 1)."""
    stack = square_stack
    k = 1
    sess = stack.session()
    b = rand_pair(stack, k, 5)
    bvec = b.to_vector()
    xd = spla.spsolve(stack.levels[k].saddle.block.tocsc(), stack.h2(k) * bvec)
    x = np.zeros_like(bvec)
    for _ in range(4000):
        sess.smooth(k, x, bvec, stack.lam[k], 1, post=True)
    assert np.abs(x - xd).max() < 1e-9 * np.abs(xd).max()


def test_smoother_adjoint_relation(square_stack):
    from dgmg.props import check_smoother_adjoint
    rng = rng_for(43)
    for k in (1, 2, 3):
        res = check_smoother_adjoint(square_stack, k, rng, 20, 1e-11)
        assert res.passed, res


def test_mg_solve_zero(square_stack):
    z = PairField.zeros(square_stack.space(2))
    out = mg_solve(square_stack, 2, z, z, CycleConfig(m1=2, m2=2))
    assert not out.to_vector().any()


def test_mg_solve_level0_is_direct(square_stack):
    stack = square_stack
    b = rand_pair(stack, 0, 6)
    out = mg_solve(stack, 0, b, PairField.zeros(stack.space(0)),
                   CycleConfig(m1=1, m2=1))
    r = b.to_vector() - stack.apply_saddle_vec(0, out.to_vector())
    assert np.abs(r).max() < 1e-10 * np.abs(b.to_vector()).max()


def test_cycle_is_affine_in_initial_guess(square_stack):
    stack = square_stack
    k = 2
    cfg = CycleConfig(m1=2, m2=2, cycle="W")
    sess = stack.session()
    rng = rng_for(44)
    b = rng.standard_normal(2 * stack.dofs(k))
    x1 = rng.standard_normal(2 * stack.dofs(k))
    x2 = rng.standard_normal(2 * stack.dofs(k))
    y0 = cycle_vec(stack, k, b, np.zeros_like(b), cfg, sess)
    y1 = cycle_vec(stack, k, b, x1, cfg, sess)
    y2 = cycle_vec(stack, k, b, x2, cfg, sess)
    alpha = 0.6
    mix = cycle_vec(stack, k, b, alpha * x1 + (1 - alpha) * x2, cfg, sess)
    want = alpha * y1 + (1 - alpha) * y2
    assert np.abs(mix - want).max() < 1e-11 * np.abs(want).max()
    # error propagation is linear: cycle(b, x) = cycle(b, 0) + E x
    e1 = y1 - y0
    e2 = y2 - y0
    mix_err = mix - y0
    assert np.abs(mix_err - (alpha * e1 + (1 - alpha) * e2)).max() \
        < 1e-11 * np.abs(e1).max()


def test_two_grid_contracts(square_stack):
    stack = square_stack
    k = 1
    cfg = CycleConfig(m1=4, m2=4, cycle="W")
    sess = stack.session()
    x = rand_pair(stack, k, 7).to_vector()
    x /= energy_norm_vec(stack, k, x, sess)
    for _ in range(3):
        x = cycle_vec(stack, k, np.zeros_like(x), x, cfg, sess)
    assert energy_norm_vec(stack, k, x, sess) < 0.5


def test_dual_solver_converges_like_primal(square_stack):
    from dgmg.bench import measure_contraction
    stack = square_stack
    primal = measure_contraction(stack, 2, CycleConfig(m1=8, m2=8, cycle="W"),
                                 starts=2, seed=0)
    dual = measure_contraction(
        stack, 2, CycleConfig(m1=8, m2=8, cycle="W", variant="dual"),
        starts=2, seed=0)
    assert dual.value < 1.0
    assert dual.value == pytest.approx(primal.value, abs=0.05)


def test_dual_solve_residual(square_stack):
    stack = square_stack
    k = 2
    b = rand_pair(stack, k, 8)
    cfg = CycleConfig(m1=4, m2=4, cycle="W", variant="dual")
    x, info = mg_iterate(stack, k, b, cfg, rel_tol=1e-10, max_cycles=60)
    assert info.converged
    r = b.to_vector() - stack.apply_saddle_vec(k, x.to_vector(), dual=True)
    assert np.sqrt(stack.pair_inner_vec(k, r, r)) < 1e-9


def test_energy_norm_properties(square_stack, square_stack_beta4):
    from dgmg.space import pair_norm_h1beta_sq
    z = PairField.zeros(square_stack.space(1))
    assert energy_norm(square_stack, 1, z) == 0.0
    # equivalence with the weighted pair norm, stable across levels and beta
    ratios = []
    for stack in (square_stack, square_stack_beta4):
        for k in (1, 2, 3):
            for s in range(10):
                x = rand_pair(stack, k, 50 + s)
                num = energy_norm(stack, k, x) ** 2
                den = pair_norm_h1beta_sq(x, stack.beta)
                ratios.append(num / den)
    assert min(ratios) > 0.1 and max(ratios) / min(ratios) < 12.0


def test_zero_order_norm_equivalent_to_l2(square_stack):
    stack = square_stack
    for k in (1, 2):
        for s in range(10):
            x = rand_pair(stack, k, 60 + s)
            l2sq = l2_norm(x.p) ** 2 + l2_norm(x.y) ** 2
            ratio = pair_norm(stack, k, x) ** 2 / l2sq
            assert 12.0 - 1e-9 < ratio < 48.0 + 1e-9


def test_dual_energy_norm(square_stack):
    stack = square_stack
    x = rand_pair(stack, 2, 70)
    primal = energy_norm(stack, 2, x)
    dual = energy_norm_dual(stack, 2, x)
    assert primal > 0 and dual > 0
    assert 0.05 < dual / primal < 20.0


def test_mg_iterate_solves(square_stack):
    stack = square_stack
    k = 3
    b = rand_pair(stack, k, 9)
    x, info = mg_iterate(stack, k, b, CycleConfig(m1=4, m2=4, cycle="W"),
                         rel_tol=1e-10, max_cycles=60)
    assert info.converged and info.rel_residual < 1e-10
