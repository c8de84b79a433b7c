import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse.linalg import aslinearoperator

from pgssn import oracles
from pgssn.subproblem import (TrsProblem, solve_trs, steihaug_cg,
                              trs_objective)


def test_identity_boundary():
    sol = solve_trs(TrsProblem(np.eye(2), np.array([2.0, 0.0]), 1.0))
    np.testing.assert_allclose(sol.d, [-1, 0], atol=1e-12)
    assert sol.nu == pytest.approx(1.0, abs=1e-9)
    assert sol.status == 'Boundary'


def test_identity_interior():
    sol = solve_trs(TrsProblem(np.eye(2), np.array([0.5, 0.0]), 1.0))
    np.testing.assert_allclose(sol.d, [-0.5, 0], atol=1e-15)
    assert sol.nu == 0 and sol.status == 'Interior'


def test_hard_case_against_grid():
    G, g = np.diag([-1.0, 2.0]), np.array([0.0, 1.0])
    p = TrsProblem(G, g, 1.0)
    sol = solve_trs(p)
    _, f_grid = oracles.trs_grid_oracle(G, g, 1.0)
    assert trs_objective(p, sol.d) <= f_grid + 1e-6
    assert np.linalg.norm(sol.d) == pytest.approx(1.0, abs=1e-10)
    assert trs_objective(p, sol.d) == pytest.approx(-2 / 3, abs=1e-10)


def test_objective_of_zero():
    p = TrsProblem(np.eye(3), np.ones(3), 1.0)
    assert trs_objective(p, np.zeros(3)) == 0


def _random_problem(seed, n):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    G = 0.5 * (M + M.T)
    if rng.random() < 0.4:
        G = G @ G.T + 0.1 * np.eye(n)
    return G, rng.standard_normal(n) * rng.choice([1e-2, 1.0]), \
        float(rng.uniform(0.1, 3.0)), rng


@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_global_optimality_small(seed, n):
    G, g, radius, _ = _random_problem(seed, n)
    p = TrsProblem(G, g, radius)
    sol = solve_trs(p)
    _, f_grid = oracles.trs_grid_oracle(G, g, radius)
    assert trs_objective(p, sol.d) <= f_grid + 1e-6
    if sol.status == 'Interior':
        assert np.linalg.norm(G @ sol.d + g) <= 1e-10 * (1 + np.linalg.norm(g))


@given(st.integers(0, 10_000), st.integers(2, 30))
def test_kkt_conditions(seed, n):
    G, g, radius, rng = _random_problem(seed, n)
    sol = solve_trs(TrsProblem(G, g, radius))
    d, nu = sol.d, sol.nu
    scale = 1 + np.linalg.norm(g) + np.abs(G).max() * radius
    assert np.linalg.norm(d) <= radius * (1 + 1e-9)
    assert nu >= 0
    assert np.linalg.eigvalsh(G + nu * np.eye(n)).min() >= -1e-8 * scale
    assert np.linalg.norm((G + nu * np.eye(n)) @ d + g) <= 1e-7 * scale
    assert nu * abs(np.linalg.norm(d) - radius) <= 1e-7 * scale
    # no random feasible point does better
    p = TrsProblem(G, g, radius)
    f = trs_objective(p, d)
    for _ in range(50):
        v = rng.standard_normal(n)
        v *= radius * rng.random() ** (1 / n) / np.linalg.norm(v)
        assert f <= trs_objective(p, v) + 1e-9 * scale


@given(st.integers(0, 10_000))
def test_value_monotone_in_radius(seed):
    G, g, radius, _ = _random_problem(seed, 6)
    vals = [trs_objective(TrsProblem(G, g, r), solve_trs(TrsProblem(G, g, r)).d)
            for r in (0.5 * radius, radius, 2 * radius)]
    assert vals[0] >= vals[1] - 1e-10 and vals[1] >= vals[2] - 1e-10


def test_steihaug_matches_exact_for_spd():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((20, 20))
    G = M @ M.T + np.eye(20)
    g = rng.standard_normal(20)
    for radius in (1e-2, 100.0):
        exact = solve_trs(TrsProblem(G, g, radius))
        cg = solve_trs(TrsProblem(aslinearoperator(G), g, radius))
        p = TrsProblem(G, g, radius)
        assert np.linalg.norm(cg.d) <= radius * (1 + 1e-12)
        if exact.status == 'Interior':
            np.testing.assert_allclose(cg.d, exact.d, atol=1e-8)
        else:
            # truncated CG is a Cauchy-improving approximation on the boundary
            cauchy = -radius * g / np.linalg.norm(g)
            assert trs_objective(p, cg.d) <= trs_objective(p, cauchy) + 1e-12


def test_steihaug_negative_curvature_hits_boundary():
    sol = steihaug_cg(aslinearoperator(-np.eye(3)), np.ones(3), 2.0)
    assert np.linalg.norm(sol.d) == pytest.approx(2.0)
    assert sol.status == 'Boundary'


def test_invalid_inputs():
    with pytest.raises(ValueError):
        TrsProblem(np.eye(2), np.ones(2), 0.0)
    with pytest.raises(ValueError):
        solve_trs(TrsProblem(np.eye(2), np.array([np.nan, 1.0]), 1.0))
    with pytest.raises(ValueError):
        solve_trs(TrsProblem(np.eye(3), np.ones(2), 1.0))
