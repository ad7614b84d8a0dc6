"""Value iteration and the refined continuous policy."""

from dataclasses import replace

import numpy as np
import pytest

from qsave.core import C_FLOOR, IncomeState, ModelParams, utility, validate_params
from qsave.errors import NoConvergence
from qsave.rational import (
    consumption_refined,
    load_solution,
    mpc_refined,
    save_solution,
    savings_refined,
    solve_value_iteration,
)

STATES = (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED)


@pytest.fixture(scope="module")
def small_params():
    return validate_params(replace(
        ModelParams(), train_grid_n=80, savings_grid_n=900,
    ))


@pytest.fixture(scope="module")
def small_sol(small_params):
    return solve_value_iteration(small_params)


def test_bellman_residual_small(small_sol):
    # the stored residual recomputes T V - V from scratch
    assert small_sol.bellman_residual() < 1e-8


def test_bellman_residual_independent_oracle(small_sol):
    """Recompute max_s u(x-s) + beta E[V] by brute force, no solver code."""
    p = small_sol.params
    sav = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    pm = p.transition.matrix()
    worst = 0.0
    for y in STATES:
        i = int(y)
        cont = pm[i, 0] * np.interp(sav, small_sol.asset_grid, small_sol.v[0]) \
            + pm[i, 1] * np.interp(sav, small_sol.asset_grid, small_sol.v[1])
        for j, a in enumerate(small_sol.asset_grid):
            x = p.income_value(y) + p.gross_return * a
            feas = sav < x - C_FLOOR
            q = utility(x - sav[feas]) + p.beta * cont[feas]
            worst = max(worst, abs(float(np.max(q)) - small_sol.v[i, j]))
    assert worst < 1e-8


def test_policy_monotone_and_bounded(small_sol):
    p = small_sol.params
    for y in STATES:
        pol = small_sol.policy[int(y)]
        assert np.all(np.diff(pol) >= 0.0)
        assert pol.min() >= p.a_min and pol.max() <= p.a_max
        c = small_sol.consumption_at(y, small_sol.asset_grid)
        assert np.all(c > 0.0)


def test_employed_consume_more(small_sol):
    a = np.linspace(0.0, 4.5, 31)
    ce = consumption_refined(small_sol, IncomeState.EMPLOYED, a)
    cu = consumption_refined(small_sol, IncomeState.UNEMPLOYED, a)
    assert np.all(ce > cu)


def test_impatience_near_zero_beta():
    """With beta tiny, saving has almost no value: consume all cash on hand."""
    p = validate_params(replace(
        ModelParams(), beta=1e-6, train_grid_n=40, savings_grid_n=400,
    ))
    sol = solve_value_iteration(p)
    for y in STATES:
        x = p.income_value(y) + p.gross_return * sol.asset_grid
        np.testing.assert_allclose(sol.consumption_at(y, sol.asset_grid), x, rtol=1e-3)


def test_ev_definition(small_sol):
    """ev must equal the transition-weighted value rows."""
    pm = small_sol.params.transition.matrix()
    np.testing.assert_allclose(small_sol.ev, pm @ small_sol.v, atol=0)


def test_refined_policy_matches_grid_argmax(small_sol):
    """At asset nodes (where no interpolation happens) the continuous
    refinement sits within a couple of savings-grid steps of the argmax."""
    p = small_sol.params
    step = (p.a_max - p.a_min) / (p.savings_grid_n - 1)
    a = small_sol.asset_grid[::5]
    for y in STATES:
        s_grid = small_sol.savings_at(y, a)
        s_ref = savings_refined(small_sol, y, a)
        assert np.max(np.abs(np.asarray(s_ref) - np.asarray(s_grid))) < 2.0 * step


def test_refined_policy_improves_objective(small_sol):
    """At interior points the refined choice scores >= the grid choice."""
    p = small_sol.params
    for y in STATES:
        for a in (0.3, 1.1, 2.7):
            x = p.income_value(y) + p.gross_return * a
            s_ref = float(savings_refined(small_sol, y, a))
            s_grd = float(small_sol.savings_at(y, a))
            q_ref = utility(x - s_ref) + p.beta * small_sol.ev_at(y, s_ref)
            q_grd = utility(x - s_grd) + p.beta * small_sol.ev_at(y, s_grd)
            assert q_ref >= q_grd - 1e-12


def test_mpc_refined_matches_finite_difference(small_sol):
    p = small_sol.params
    a = np.linspace(0.0, 3.5, 15)
    for y in STATES:
        m = mpc_refined(small_sol, y, a)
        c0 = consumption_refined(small_sol, y, a)
        c1 = consumption_refined(small_sol, y, a + p.transfer)
        # the shifted point gets the extra cash R*tau; MPC is the consumption
        # response per unit of transfer
        np.testing.assert_allclose(m, (np.asarray(c1) - np.asarray(c0)) / p.transfer,
                                   atol=1e-12)
        assert np.all(np.asarray(m) > 0.0)
        assert np.all(np.asarray(m) < 1.1)


def test_mpc_decreasing_in_assets(small_sol):
    """Liquidity gradient: poorer agents consume more out of a transfer."""
    a = np.array([0.0, 0.5, 1.5, 3.0])
    m = np.asarray(mpc_refined(small_sol, IncomeState.UNEMPLOYED, a))
    assert np.all(np.diff(m) < 0.0)


def test_save_load_roundtrip(small_sol, tmp_path):
    path = tmp_path / "sol.csv"
    save_solution(small_sol, path)
    back = load_solution(path)
    np.testing.assert_array_equal(back.v, small_sol.v)
    np.testing.assert_array_equal(back.policy, small_sol.policy)
    np.testing.assert_array_equal(back.ev, small_sol.ev)
    np.testing.assert_array_equal(back.asset_grid, small_sol.asset_grid)
    assert back.params == small_sol.params


def test_no_convergence_raises(small_params):
    with pytest.raises(NoConvergence):
        solve_value_iteration(small_params, tol=1e-12, max_iter=3)
