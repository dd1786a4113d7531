from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiglobal.burnside import k_inf, y2_policy
from semiglobal.errors import ExistenceError, RecursionBreakdownError, SolvabilityPreconditionError
from semiglobal.models import linear_model
from semiglobal.schur import spectral_norm
from semiglobal.tvlre import (
    NormBounds,
    backward_recursion,
    limit_convergence_test,
    majorant_fixed_points,
    norm_bounds,
    policy_matrix,
    solvability_check,
    solve_order,
)

from conftest import Pipeline


def nb(a, b, c, d):
    return NormBounds(a, b, c, d, a, b)


# -- system assembly --------------------------------------------------------


def test_steady_path_has_constant_coefficients(burnside_pipe):
    p = burnside_pipe(0.0)
    assert np.max(np.abs(p.sys.M)) < 1e-14
    assert np.max(np.abs(p.sys.Q)) < 1e-12
    assert np.allclose(p.sys.A_t, p.split.A[None], atol=1e-14)
    assert np.allclose(p.sys.B_t, p.split.B[None], atol=1e-14)


def test_deviation_decays_at_rho(bp, burnside_pipe):
    p = burnside_pipe(5.0)
    m = np.array([spectral_norm(M) for M in p.sys.M])
    assert m[0] > 0
    slope = np.polyfit(np.arange(10, 120), np.log(m[10:120]), 1)[0]
    assert math.exp(slope) == pytest.approx(bp.rho, abs=1e-3)
    assert m[-1] <= 1e-6 * m.max()


def test_q_blocks_reconstruct(burnside_pipe):
    p = burnside_pipe(5.0)
    Zi, Z = p.split.Z_inv, p.split.Z
    for t in (0, 1, 10, 100, 300):
        assert np.allclose(Zi @ p.sys.M[t] @ Z, p.sys.Q[t], atol=1e-10)


def test_phi_condition_logged(burnside_pipe):
    p = burnside_pipe(5.0)
    assert p.sys.cond_Phi.shape == (301,) and np.all(np.isfinite(p.sys.cond_Phi))


# -- norm bounds and solvability -------------------------------------------


def test_norm_bounds_at_steady_state(burnside_pipe):
    p = burnside_pipe(0.0)
    b = norm_bounds(p.sys)
    assert b.a == pytest.approx(spectral_norm(p.split.A), rel=1e-12)
    assert b.b == pytest.approx(spectral_norm(np.linalg.inv(p.split.B)), rel=1e-12)
    assert b.c < 1e-12 and b.d < 1e-12


def test_coupling_shrinks_toward_steady_state(burnside_pipe):
    far, near = norm_bounds(burnside_pipe(5.0).sys), norm_bounds(burnside_pipe(1.0).sys)
    assert far.d > near.d > 0
    # The Burnside split is triangular, so the other coupling block is zero up to rounding.
    assert far.c < 1e-10 and near.c < 1e-10


def test_bounds_monotone_in_start(burnside_pipe):
    sys = burnside_pipe(5.0).sys
    prev = norm_bounds(sys, 0)
    for s in (10, 50, 100, 200):
        cur = norm_bounds(sys, s)
        assert cur.a <= prev.a + 1e-15 and cur.b <= prev.b + 1e-15
        assert cur.c <= prev.c + 1e-15 and cur.d <= prev.d + 1e-15
        prev = cur


def test_solvability_c_zero_always_passes():
    for d in (0.0, 1.0, 1e6):
        assert solvability_check(nb(0.9, 0.8, 0.0, d)).passed


def test_solvability_worked_examples():
    r = solvability_check(nb(0.9, 0.8, 0.05, 0.05))
    assert r.passed and r.lhs == pytest.approx(0.0025) and r.rhs == pytest.approx(0.030625)
    assert r.margin == pytest.approx((1 + 0.72) / 2)
    r = solvability_check(nb(0.9, 0.8, 0.2, 0.2))
    assert not r.passed and r.lhs == pytest.approx(0.04)


def test_solvability_precondition():
    with pytest.raises(SolvabilityPreconditionError):
        solvability_check(nb(1.0, 0.5, 0.1, 0.1))
    with pytest.raises(SolvabilityPreconditionError):
        solvability_check(nb(0.5, 1.2, 0.1, 0.1))


def test_majorant_worked_example():
    r = majorant_fixed_points(0.9, 0.8, 0.05, 0.05)
    assert r.s1 == pytest.approx(0.08 / (0.28 + math.sqrt(0.072)), rel=1e-14)
    assert round(r.s1, 4) == 0.1459
    it = r.iterates
    hit = np.nonzero(np.abs(it - r.s1) < 1e-10)[0]
    assert hit.size and hit[0] < 200
    assert np.all(np.diff(it) >= 0)


def test_majorant_degenerate_cases():
    assert majorant_fixed_points(0.9, 0.8, 0.3, 0.0).s1 == 0.0
    a, b, d = 0.9, 0.8, 0.05
    assert majorant_fixed_points(a, b, 1e-12, d).s1 == pytest.approx(b * d / (1 - b * a), rel=1e-9)
    with pytest.raises(ExistenceError):
        majorant_fixed_points(0.9, 0.8, 0.2, 0.2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 0.99), st.floats(0.01, 0.99), st.floats(0, 2), st.floats(0, 2))
def test_majorant_orbit_increases_to_s1(a, b, c, d):
    if not c * d < ((1 - a * b) / (2 * b)) ** 2 * 0.99:
        return
    r = majorant_fixed_points(a, b, c, d)
    assert np.all(np.diff(r.iterates) >= -1e-15)
    assert r.iterates[-1] == pytest.approx(r.s1, rel=1e-9, abs=1e-12)
    assert r.s1 <= r.s2


# -- backward recursion ----------------------------------------------------


def test_zero_forcing_gives_zero_g(burnside_pipe):
    assert np.all(burnside_pipe(5.0).tables.g == 0)


def test_first_order_from_zero(burnside_pipe):
    p = burnside_pipe(5.0)
    sol = solve_order(p.sys, p.tables)
    assert p.tables.g[0] == pytest.approx(np.zeros(1))
    assert np.all(sol.y0 == 0) and np.all(sol.x == 0) and np.all(sol.y == 0)


def test_recursion_identity(burnside_pipe):
    for k in (5.0, -5.0):
        p = burnside_pipe(k)
        s, tb = p.sys, p.tables
        for t in range(s.T + 1):
            lhs = (s.B_t[t] + tb.K[t + 1] @ s.Q12[t]) @ tb.K[t]
            rhs = s.Q21[t] + tb.K[t + 1] @ s.A_t[t]
            assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


@pytest.mark.parametrize("k", [5.0, 3.0, 1.0, -1.0, -5.0])
def test_k_matches_analytic(bp, burnside_pipe, k):
    p = burnside_pipe(k)
    P = policy_matrix(p.split, p.tables.K[:51])[:, 0, 0]
    analytic = k_inf(bp, bp.xbar + k * bp.sigma_x, np.arange(51))
    assert np.max(np.abs(-P / analytic - 1)) < 1e-8


def test_k_majorant_and_margin(burnside_pipe):
    for k in (5.0, 3.0, 1.0):
        p = burnside_pipe(k)
        b = norm_bounds(p.sys)
        rep = solvability_check(b)
        assert rep.passed
        tb = p.tables
        knorm = np.array([spectral_norm(K) for K in tb.K])
        assert np.all(knorm <= rep.s1 + 1e-12)
        for t in range(p.sys.T + 1):
            Binv = np.linalg.inv(p.sys.B_t[t])
            assert spectral_norm(Binv) * knorm[t + 1] * spectral_norm(p.sys.Q12[t]) < 1


def test_product_of_inverses_decays(burnside_pipe):
    p = burnside_pipe(5.0)
    prod = np.eye(1)
    norms = []
    for t in range(p.sys.T + 1):
        prod = prod @ np.linalg.inv(p.tables.Lmat[t])
        norms.append(spectral_norm(prod))
    norms = np.array(norms)
    env = (spectral_norm(np.linalg.inv(p.split.B)) + 1e-3) ** np.arange(1, len(norms) + 1)
    assert norms[-1] < 1e-9
    assert np.all(norms <= 2 * env)


def test_breakdown_names_date(burnside_pipe):
    p = burnside_pipe(5.0)
    P = p.sys.P.copy()
    P[17, 1, 1] = 0.0
    P[17, 1, 0] = 0.0
    bad = dataclasses.replace(p.sys, P=P)
    with pytest.raises(RecursionBreakdownError) as ei:
        backward_recursion(bad, check=False)
    assert ei.value.t == 17


def test_precondition_failure_is_a_warning(burnside_pipe):
    p = burnside_pipe(-5.0)
    with pytest.warns(RuntimeWarning):
        tb = backward_recursion(p.sys)
    assert tb.solvability is None and tb.warnings
    assert np.all(tb.cond_L < 1e12)


# -- constant-coefficient cross-check ---------------------------------------


def test_constant_coefficient_policy_matches_eigenvectors():
    a, b, c, d = 0.9, 0.1, 0.2, 1.5
    m = linear_model(
        [[[0.0], [1.0]], [[-b], [-d]], [[1.0], [0.0]], [[-a], [-c]], np.zeros((2, 0)), np.zeros((2, 0))],
        n_x=1, n_y=1,
    )
    p = Pipeline(m, [1.0], None, T=200)
    L = np.array([[a, b], [c, d]])
    assert np.allclose(p.L, L)
    w, V = np.linalg.eig(L.T)
    left = V[:, np.argmax(np.abs(w))].real  # left eigenvector of the unstable root
    slope = -left[0] / left[1]
    P = policy_matrix(p.split, p.tables.K[:100])[:, 0, 0]
    assert np.allclose(P, slope, rtol=1e-12)
    assert p.path.y[0, 0] == pytest.approx(slope * 1.0, rel=1e-10)


# -- order solutions -------------------------------------------------------


def test_zero_everything_is_zero(burnside_pipe):
    p = burnside_pipe(3.0)
    sol = solve_order(p.sys, p.tables, np.zeros(1))
    assert not np.any(sol.s) and not np.any(sol.u)


def test_order_two_matches_analytic(bp, burnside_solution):
    sol = burnside_solution(3.0)
    assert sol.y0(2)[0] == pytest.approx(y2_policy(bp, bp.xbar + 3 * bp.sigma_x)[0], rel=1e-7)
    # initial state of every order above zero is zero
    assert sol.x[2][0] == pytest.approx(np.zeros(1), abs=1e-12)


def test_order_two_paths_bounded(bp, burnside_solution):
    sol = burnside_solution(5.0)
    half_life = math.log(2) / -math.log(bp.rho)
    n = int(5 * half_life)
    for arr in (sol.orders[2].s, sol.orders[2].u):
        assert np.all(np.isfinite(arr[:n]))
        assert np.max(np.abs(arr[:n])) <= 10 * np.max(np.abs(arr[:5]))


def test_terminal_value_washes_out(bmodel, bp, burnside_solution):
    from semiglobal.expansion import solve_expansion

    ref = burnside_solution(3.0)
    alt = solve_expansion(bmodel, [bp.xbar + 3 * bp.sigma_x], [0.0], order=2, terminal_u=[1e3], path=ref.path)
    assert alt.y0(2)[0] == pytest.approx(ref.y0(2)[0], rel=1e-6)


# -- horizon convergence ---------------------------------------------------


def test_convergence_steady_path_zero(burnside_pipe):
    r = limit_convergence_test(burnside_pipe(0.0).sys, T1=100, step=25)
    assert max(r.differences) < 1e-14


def test_convergence_long_horizons(burnside_pipe):
    r = limit_convergence_test(burnside_pipe(5.0).sys, T1=200, step=50, n_steps=1)
    assert r.differences[0] < 1e-10


def test_convergence_rate_near_rho(bp, burnside_pipe):
    r = limit_convergence_test(burnside_pipe(5.0).sys, T1=100, step=25)
    assert r.decaying
    assert r.rate == pytest.approx(bp.rho, abs=0.05)
