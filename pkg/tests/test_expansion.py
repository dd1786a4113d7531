from __future__ import annotations

import math

import numpy as np
import pytest

from semiglobal.burnside import exact_policy, k_inf, y2_policy
from semiglobal.errors import BlanchardKahnError, HorizonError, SolverError
from semiglobal.expansion import (
    argument_covariance,
    eta2_forcing,
    eta2_path,
    first_order_ma,
    simulate_first_order as simulate,
    path_hessians,
    solve_expansion,
    stacked_loadings,
)
from semiglobal.models import linear_model

N_MC = 100_000


def simulate_first_order(sol, model, t_max, n, seed):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return simulate(sol, model, t_max, n, rng)


# -- moving-average loadings -----------------------------------------------


def test_first_step_is_pure_impact(burnside_solution):
    sol = burnside_solution(5.0)
    ma = sol.ma
    assert np.all(ma.gamma[1, 0] == 0) and np.all(ma.gamma[1, 2:] == 0)
    sp = sol.split
    K, R = sol.tables[1].K[1], sol.tables[1].R[1]
    G = np.array([[1.0]])
    dy = -np.linalg.solve(sp.Zi22 + K @ sp.Zi12, (sp.Zi21 + K @ sp.Zi11) @ G + R)
    assert ma.gamma[1, 1] == pytest.approx(sp.Zi11 @ G + sp.Zi12 @ dy, rel=1e-14)


def test_state_surprise_equals_loading(burnside_solution, growth_solution, gmodel):
    for sol, G in ((burnside_solution(5.0), np.eye(1)), (growth_solution, gmodel.x_shock_loading)):
        for t in (1, 2, 50, 301):
            assert np.allclose(sol.ma.rho_x[t, t], G, atol=1e-12)


def test_burnside_state_variance_closed_form(bp, burnside_solution):
    ma = burnside_solution(-3.0).ma
    for i in range(1, 80):
        v = ma.covariance("x", i, np.eye(1))[0, 0]
        assert v == pytest.approx((1 - bp.rho ** (2 * i)) / (1 - bp.rho**2), rel=1e-12)
    assert ma.covariance("x", 1, np.eye(1))[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert ma.covariance("x", 2, np.eye(1))[0, 0] == pytest.approx(1.81, abs=1e-14)


def test_burnside_jump_loadings_follow_policy(bp, burnside_solution):
    ma = burnside_solution(2.0).ma
    x0 = bp.xbar + 2 * bp.sigma_x
    K = k_inf(bp, x0, np.arange(40))
    for t in range(1, 40):
        assert ma.rho_y[t, 1 : t + 1, 0, 0] == pytest.approx(-K[t] * ma.rho_x[t, 1 : t + 1, 0, 0], rel=1e-9)


def test_ma_covariance_matches_recursion(growth_solution, gmodel):
    """Second moments from the loadings against a forward covariance recursion of (x, y, z)."""
    sol = growth_solution
    sys, tb, sp = sol.system, sol.tables[1], sol.split
    G = gmodel.x_shock_loading
    # joint covariance of (s_t, z_t), propagated exactly
    nx, nz = gmodel.n_x, gmodel.n_z
    S = np.zeros((nx + nz, nx + nz))
    for t in range(0, 40):
        W = sp.Zi22 + tb.K[t + 1] @ sp.Zi12
        dy = -np.linalg.solve(W, (sp.Zi21 + tb.K[t + 1] @ sp.Zi11) @ G + tb.R[t + 1])
        ds = sp.Zi11 @ G + sp.Zi12 @ dy
        F = np.block([
            [sys.A_t[t] - sys.Q12[t] @ tb.K[t], sys.Pi1[t] - sys.Q12[t] @ tb.R[t]],
            [np.zeros((nz, nx)), gmodel.Lambda],
        ])
        E = np.vstack([ds, np.eye(nz)])
        S = F @ S @ F.T + E @ gmodel.Omega @ E.T
        Kt, Rt = tb.K[t + 1], tb.R[t + 1]
        Mx = np.hstack([sp.Z11 - sp.Z12 @ Kt, -sp.Z12 @ Rt])
        My = np.hstack([sp.Z21 - sp.Z22 @ Kt, -sp.Z22 @ Rt])
        assert sol.ma.covariance("x", t + 1, gmodel.Omega) == pytest.approx(Mx @ S @ Mx.T, rel=1e-10)
        assert sol.ma.covariance("y", t + 1, gmodel.Omega) == pytest.approx(My @ S @ My.T, rel=1e-10)


def test_ma_moments_match_monte_carlo(growth_solution, gmodel):
    x, y, z = simulate_first_order(growth_solution, gmodel, 25, N_MC, seed=12345)
    for t in (1, 5, 25):
        for which, draws in (("x", x[t, :, 0]), ("y", y[t, :, 0])):
            v = growth_solution.ma.covariance(which, t, gmodel.Omega)[0, 0]
            sq = draws**2
            se = sq.std(ddof=1) / math.sqrt(N_MC)
            assert abs(sq.mean() - v) <= 3 * se, (which, t)


# -- second-order forcing --------------------------------------------------


def test_linear_model_has_no_forcing():
    m = linear_model(
        [[[0.0], [1.0]], [[-0.1], [-1.5]], [[1.0], [0.0]], [[-0.9], [-0.2]], [[0.0], [0.3]], [[0.1], [0.0]]],
        n_x=1, n_y=1, n_z=1, Lambda=[[0.5]], Omega=[[1.0]], sigma=0.1,
    )
    sol = solve_expansion(m, [1.0], [0.5], order=2, T=200)
    assert np.max(np.abs(sol.tables[2].forcing)) == 0.0
    assert np.max(np.abs(sol.y[2])) == 0.0


def test_burnside_forcing_reduces_to_scalar_bracket(bp, burnside_solution):
    sol = burnside_solution(3.0)
    x0 = bp.xbar + 3 * bp.sigma_x
    e = sol.tables[2].forcing
    K = k_inf(bp, x0, np.arange(60))
    for t in range(0, 58):
        E = math.exp(bp.theta * sol.path.x[t + 1, 0])
        vx = sol.ma.covariance("x", t + 1, np.eye(1))[0, 0]
        want = -0.5 * bp.beta * bp.theta * E * vx * (bp.theta * (1 + sol.path.y[t + 1, 0]) - 2 * K[t + 1])
        assert e[t, 0] == pytest.approx(want, rel=1e-9)
        assert e[t, 1] == 0.0


def test_forcing_single_date_matches_path(growth_solution, gmodel):
    sol = growth_solution
    H = path_hessians(gmodel, sol.path)
    full = eta2_path(H, sol.ma, gmodel.Omega)
    for t in (0, 3, 100, 300):
        assert eta2_forcing(H[t], sol.ma, gmodel.Omega, t) == pytest.approx(full[t], rel=1e-12, abs=1e-300)


def test_forcing_monte_carlo(growth_solution, gmodel):
    sol = growth_solution
    H = path_hessians(gmodel, sol.path)
    x, y, z = simulate_first_order(sol, gmodel, 12, N_MC, seed=777)
    for t in (0, 4, 10):
        v = np.concatenate([y[t + 1], y[t], x[t + 1], x[t], z[t + 1], z[t]], axis=1)
        q = 0.5 * np.einsum("rab,na,nb->nr", H[t], v, v)
        est, se = q.mean(axis=0), q.std(axis=0, ddof=1) / math.sqrt(N_MC)
        want = eta2_forcing(H[t], sol.ma, gmodel.Omega, t)
        assert np.all(np.abs(est - want) < 3 * se + 1e-15)


def test_forcing_beyond_horizon(burnside_solution):
    ma = burnside_solution(1.0).ma
    with pytest.raises(HorizonError):
        stacked_loadings(ma, ma.T + 1)
    assert argument_covariance(ma, np.eye(1), ma.T).shape == (6, 6)


# -- full pipeline ---------------------------------------------------------


def test_zero_sigma_reproduces_path(bp, bmodel):
    sol = solve_expansion(bmodel, [bp.xbar + 4 * bp.sigma_x], [0.0], sigma=0.0, order=2)
    assert np.array_equal(sol.Ey, sol.path.y) and np.array_equal(sol.Ex, sol.path.x)
    base = solve_expansion(bmodel, [bp.xbar + 4 * bp.sigma_x], [0.0], order=0)
    assert np.array_equal(base.y[0], sol.y[0])


def test_first_order_mean_is_zero(burnside_solution, growth_solution):
    for sol in (burnside_solution(5.0), growth_solution):
        assert not np.any(sol.y[1]) and not np.any(sol.x[1])
        assert not np.any(sol.tables[1].g)


def test_sigma_scaling(bp, bmodel, burnside_solution):
    ref = burnside_solution(2.0)
    a = solve_expansion(bmodel, [bp.xbar + 2 * bp.sigma_x], [0.0], sigma=0.01, path=ref.path)
    b = solve_expansion(bmodel, [bp.xbar + 2 * bp.sigma_x], [0.0], sigma=0.02, path=ref.path)
    da, db = a.Ey - a.path.y, b.Ey - b.path.y
    assert np.max(np.abs(db - 4 * da)) <= 1e-12 * np.max(np.abs(db))


def test_precautionary_term_positive(bp, burnside_solution):
    sol = burnside_solution(0.0)
    assert sol.y0(2)[0] > 0
    assert exact_policy(bp, bp.xbar) > bp.ybar
    assert sol.policy[0] == pytest.approx(bp.ybar + bp.sigma**2 * y2_policy(bp, bp.xbar)[0], rel=1e-10)


def test_generic_second_order_on_full_grid(bp, bmodel):
    worst = 0.0
    for x0 in bp.grid():
        sol = solve_expansion(bmodel, [x0], [0.0], order=2)
        worst = max(worst, abs(sol.y0(2)[0] / y2_policy(bp, x0)[0] - 1))
    assert worst < 1e-6


def test_growth_second_order_matches_lognormal_moments(growth_solution, gmodel):
    """With full depreciation log k and log c are linear in the shocks, so E_0 k_t and E_0 c_t are exact."""
    sol = growth_solution
    al, rho = gmodel.params["alpha"], gmodel.params["rho"]
    T = 80
    vz, vl, czl = np.zeros(T + 2), np.zeros(T + 2), np.zeros(T + 2)
    for t in range(T + 1):
        vz[t + 1] = rho**2 * vz[t] + 1
        vl[t + 1] = al**2 * vl[t] + vz[t] + 2 * al * czl[t]
        czl[t + 1] = rho * (al * czl[t] + vz[t])
    k0, c0 = sol.path.x[: T + 2, 0], sol.path.y[: T + 2, 0]
    k2 = k0 * vl / 2
    c2 = c0 * (vz + al**2 * vl + 2 * al * czl) / 2
    assert np.max(np.abs(sol.x[2][: T + 2, 0] - k2)) < 1e-5 * np.max(np.abs(k2))
    assert np.max(np.abs(sol.y[2][: T + 2, 0] - c2)) < 1e-5 * np.max(np.abs(c2))
    assert abs(sol.y0(2)[0]) < 1e-6 * np.max(np.abs(c2))


def test_impulse_response(bp, burnside_solution):
    sol = burnside_solution(1.0)
    ix, iy = sol.impulse_response([1.0])
    t = np.arange(1, 60)
    assert ix[0, 0] == 0 and iy[0, 0] == 0
    assert ix[1:60, 0] == pytest.approx(bp.rho ** (t - 1), rel=1e-12)
    K = k_inf(bp, bp.xbar + bp.sigma_x, t)
    assert iy[1:60, 0] == pytest.approx(-K * bp.rho ** (t - 1), rel=1e-9)


def test_stage_tags():
    # two explosive roots but only one jump variable
    m = linear_model(
        [[[0.0], [1.0]], [[0.0], [-2.0]], [[1.0], [0.0]], [[-3.0], [0.0]], np.zeros((2, 0)), np.zeros((2, 0))],
        n_x=1, n_y=1,
    )
    with pytest.raises(SolverError) as ei:
        solve_expansion(m, [0.0], None, order=1, T=20)
    assert isinstance(ei.value, BlanchardKahnError) or ei.value.stage in ("det-path", "schur-split")
