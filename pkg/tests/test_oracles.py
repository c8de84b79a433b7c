import math

import numpy as np
import pytest

from pgssn import oracles


def test_quadratic_minimizer():
    t, f, gap = oracles.grid_scalar_prox(lambda t: 0.5 * (t - 3) ** 2,
                                         oracles.GridSpec(-10, 10))
    assert abs(t - 3) <= 1e-10 and gap == math.inf


def test_lq_oracle_against_stationarity():
    # the nonzero minimizer solves t - z + w q t^(q-1) = 0
    t, _, _ = oracles.lq_grid_prox(0.5, 1.0, 10.0)
    assert abs(t - 10 + 0.5 / math.sqrt(t)) <= 1e-12


def test_symmetric_basins_are_tied():
    obj = lambda t: (t * t - 1) ** 2
    _, _, gap = oracles.grid_scalar_prox(obj, oracles.GridSpec(-2, 2))
    assert gap <= 1e-10


def test_resolution_property():
    spec = oracles.GridSpec(-1, 1)
    assert spec.resolution <= 1e-12 * (spec.hi - spec.lo)
    with pytest.raises(ValueError):
        oracles.GridSpec(1, 1)


def test_enumeration_single_point():
    z = np.array([0.7])
    x, val, unique, _ = oracles.enumerate_fused(
        z, 0.3, oracles.zero_box_segment_oracle(z, 0.1, -1, 1))
    assert x[0] == 0.7 and val == pytest.approx(0.1)


def test_enumeration_without_jump_price():
    z = np.array([0.3, -1.2, 2.0, 0.05])
    lam = 0.1
    x, val, _, _ = oracles.enumerate_fused(
        z, 0.0, oracles.zero_box_segment_oracle(z, lam, -5, 5))
    per_coord = np.minimum(0.5 * z ** 2, lam)
    assert val == pytest.approx(per_coord.sum(), abs=1e-12)


def test_enumeration_cap():
    with pytest.raises(ValueError):
        oracles.enumerate_fused(np.zeros(13), 0.1, None)


def test_fd_helpers():
    x = np.array([0.3, -2.0, 1.5])
    np.testing.assert_allclose(
        oracles.fd_gradient(lambda v: 0.5 * v @ v, x), x, atol=1e-9)
    M = np.arange(9.0).reshape(3, 3)
    np.testing.assert_allclose(
        oracles.fd_jacobian(lambda v: M @ v + 1, x), M, atol=1e-9)


def test_trs_grid_hard_case():
    d, f = oracles.trs_grid_oracle(np.diag([-1.0, 2.0]), np.array([0, 1.0]),
                                   1.0)
    assert f == pytest.approx(-2 / 3, abs=1e-8)
    assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-8)


def test_rows_agree_with_single_problem_calls():
    zs = np.array([-3.0, 0.2, 1.7, 8.0])
    w = np.array([0.5, 1.0, 0.3, 2.0])[:, None]
    obj = lambda t: 0.5 * (t - zs[:, None]) ** 2 + w * np.abs(t) ** 0.5
    der = lambda t: t - zs[:, None] + w * 0.5 * np.sign(t) * np.abs(t) ** -0.5
    r = np.abs(zs) + 1
    t, f, gap = oracles.grid_prox_rows(obj, -r, r, extra_points=(0.0,),
                                       derivative=der)
    for k in range(4):
        tk, fk, gk = oracles.lq_grid_prox(0.5, float(w[k, 0]), zs[k])
        assert t[k] == pytest.approx(tk, abs=1e-12)
        assert f[k] == pytest.approx(fk, abs=1e-12)
        assert gap[k] == pytest.approx(gk, abs=1e-9)
