import math

import numpy as np
import pytest

from pgssn import oracles
from pgssn.envelope import forward_backward, residual
from pgssn.problem import Problem, ls_oracle
from pgssn.regularizers import BoxConstraint, LqNorm, ZeroNormBox
from pgssn.solver import (BB_MAX, SolverConfig, bb_step, check_ledger,
                          newton_direction, newton_linesearch, pg_step,
                          run, search_gamma_tilde)


def test_bb_formula():
    assert bb_step(np.array([1.0, 0]), np.array([2.0, 0])) == 0.5


def test_bb_negative_curvature_clamps_high():
    assert bb_step(np.array([1.0, 0]), np.array([-2.0, 0])) == BB_MAX
    assert bb_step(np.zeros(2), np.zeros(2)) == BB_MAX


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tau=0.6, rho=0.5)
    with pytest.raises(ValueError):
        SolverConfig(beta=1.0)
    with pytest.raises(ValueError):
        SolverConfig(varsigma=20.0).varsigma_at(0)
    cfg = SolverConfig(sigma=lambda k: 1.0)
    assert cfg.sigma_at(3) == 1.0
    assert SolverConfig().l_tilde(2.0) == pytest.approx(2.004)


def test_pg_step_at_minimizer_stays():
    # unconstrained minimum of the quadratic with a huge inactive box
    prob = Problem(ls_oracle(np.eye(3), np.array([1.0, -2.0, 0.5])),
                   ZeroNormBox(0.0, BoxConstraint(-1e6, 1e6)))
    y = np.array([1.0, -2.0, 0.5])
    step = pg_step(prob, y, 0.1, SolverConfig())
    np.testing.assert_array_equal(step.x, y)
    assert step.backtracks == 0


def test_pg_step_decrease():
    rng = np.random.default_rng(1)
    A, b = rng.standard_normal((30, 10)), rng.standard_normal(30)
    prob = Problem(ls_oracle(A, b), LqNorm(0.05))
    cfg = SolverConfig()
    y = rng.standard_normal(10)
    step = pg_step(prob, y, 100.0, cfg)
    L = prob.lipschitz
    assert step.gamma >= 1 / (L + cfg.alpha_for(L))
    dx = step.x - y
    fb = forward_backward(prob, y, step.gamma)
    assert step.Fx <= fb.value - cfg.pg_constant(L) * dx @ dx + 1e-10


def _tie_problem():
    # A = I, x = 0: the forward point at gamma = 1/L~ is 2 gamma b, placed on
    # the l_1/2 threshold 1.5 (gamma lam)^(2/3) where 0 and the nonzero
    # stationary point tie
    lam = 1.0
    L = 2.0
    gamma = 1.0 / SolverConfig().l_tilde(L)
    b = np.zeros(3)
    b[0] = 1.5 * (gamma * lam) ** (2 / 3) / (2 * gamma)
    return Problem(ls_oracle(np.eye(3), b), LqNorm(lam, q=0.5)), gamma


def test_gamma_tilde_steps_past_tie():
    prob, gamma = _tie_problem()
    fb = forward_backward(prob, np.zeros(3), gamma)
    assert not fb.certificate.single_valued
    gt = search_gamma_tilde(prob, np.zeros(3), SolverConfig())
    assert gt.m == 1 and gt.gamma == pytest.approx(0.5 * gamma, rel=1e-15)


def test_gamma_tilde_generic_point_is_m0():
    rng = np.random.default_rng(2)
    A, b = rng.standard_normal((30, 10)), rng.standard_normal(30)
    prob = Problem(ls_oracle(A, b), LqNorm(0.05))
    cfg = SolverConfig()
    gt = search_gamma_tilde(prob, rng.standard_normal(10), cfg)
    assert gt.m == 0 and gt.gamma == 1 / cfg.l_tilde(prob.lipschitz)


@pytest.mark.parametrize('seed', range(5))
def test_gamma_tilde_box_only_is_m0(seed):
    rng = np.random.default_rng(seed)
    A, b = rng.standard_normal((15, 6)), rng.standard_normal(15)
    prob = Problem(ls_oracle(A, b), ZeroNormBox(0.0, BoxConstraint(-0.3, 0.3)))
    assert search_gamma_tilde(prob, rng.standard_normal(6), SolverConfig()).m == 0


def test_zero_residual_gives_zero_direction():
    prob = Problem(ls_oracle(np.eye(2), np.array([3.0, 0.0])), LqNorm(0.0))
    gt = search_gamma_tilde(prob, np.array([3.0, 0.0]), SolverConfig())
    d, sol, _ = newton_direction(prob, gt, SolverConfig())
    assert sol is None and not d.any()


def test_linesearch_with_zero_direction_moves_toward_t_map():
    rng = np.random.default_rng(3)
    A, b = rng.standard_normal((20, 8)), rng.standard_normal(20)
    prob = Problem(ls_oracle(A, b), LqNorm(0.1))
    cfg = SolverConfig()
    x = rng.standard_normal(8)
    gt = search_gamma_tilde(prob, x, cfg)
    y, l, fy = newton_linesearch(prob, gt, np.zeros(8), cfg)
    coef = cfg.beta ** l
    np.testing.assert_allclose(y, coef * x + (1 - coef) * gt.fb.point,
                               rtol=1e-15)
    gamma, L = gt.gamma, prob.lipschitz
    r = gt.fb.residual
    assert fy.value <= gt.fb.value - (gamma - gamma ** 2 * L) / 4 * r @ r


def test_identity_design_converges_to_fixed_point():
    b = np.zeros(10)
    b[0] = 10.0
    prob = Problem(ls_oracle(np.eye(10), b), LqNorm(0.1))
    rep = run(prob, SolverConfig(eps=1e-10))
    assert rep.status == 'Converged' and rep.ledger_ok
    r, cert = residual(prob, rep.x, rep.gamma)
    assert np.linalg.norm(r) * rep.gamma <= 1e-6 and cert.single_valued
    assert np.count_nonzero(rep.x) == 1
    # the nonzero solves 2(t - 10) + 0.05 / sqrt(t) = 0
    t = rep.x[0]
    assert abs(2 * (t - 10) + 0.05 / math.sqrt(t)) <= 1e-8


def test_no_regularization_is_damped_newton():
    rng = np.random.default_rng(4)
    A, b = rng.standard_normal((40, 10)), rng.standard_normal(40)
    prob = Problem(ls_oracle(A, b),
                   ZeroNormBox(0.0, BoxConstraint(-1e6, 1e6)))
    # with g = 0 on the relevant region every Newton step is exact, so a
    # handful of unit steps suffice
    rep = run(prob, SolverConfig(eps=1e-6))
    x_ls = np.linalg.lstsq(A, b, rcond=None)[0]
    assert rep.status == 'Converged' and rep.iters <= 6
    assert all(r.newton_bt == 0 for r in rep.records[:-1])
    np.testing.assert_allclose(rep.x, x_ls, atol=1e-7)


def test_run_is_deterministic():
    rng = np.random.default_rng(5)
    A, b = rng.standard_normal((30, 60)), rng.standard_normal(30)
    prob = Problem(ls_oracle(A, b), LqNorm(0.5, q=2 / 3))
    r1, r2 = run(prob), run(prob)
    assert r1.x.tobytes() == r2.x.tobytes()
    strip = lambda rs: [(r.k, r.F, r.FBE, r.resid, r.gamma, r.m) for r in rs]
    assert strip(r1.records) == strip(r2.records)


def test_ledger_flags_increase():
    rng = np.random.default_rng(6)
    A, b = rng.standard_normal((20, 30)), rng.standard_normal(20)
    prob = Problem(ls_oracle(A, b), LqNorm(0.2))
    cfg = SolverConfig()
    rep = run(prob, cfg)
    assert rep.ledger_ok and len(rep.records) >= 2
    recs = list(rep.records)
    recs[1].F = recs[0].F + 1.0
    assert check_ledger(recs, prob.lipschitz, cfg)


def test_iteration_cap_reports_maxiter_and_callback():
    rng = np.random.default_rng(7)
    A, b = rng.standard_normal((30, 60)), rng.standard_normal(30)
    prob = Problem(ls_oracle(A, b), LqNorm(0.01))
    seen = []
    rep = run(prob, SolverConfig(eps=0.0, max_iter=3), callback=seen.append)
    assert rep.status == 'MaxIter' and len(seen) == len(rep.records) == 3


def test_bad_start_shape():
    prob = Problem(ls_oracle(np.eye(2), np.ones(2)), LqNorm(0.1))
    with pytest.raises(ValueError):
        run(prob, y0=np.zeros(3))
