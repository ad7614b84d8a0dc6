"""Rational (fully informed) benchmark solved by value function iteration.

The Bellman equation is

    V(a, y) = max_{a'}  log(y + R a - a') + beta * E[ V(a', y') | y ]

with a' restricted to [a_min, a_max].  The solver discretizes assets on a
train_grid_n-point grid, maximizes over the full savings_grid_n-point choice
grid, and interpolates V piecewise linearly between asset nodes.  Iteration
stops when the sup-norm change falls below tol; the operator is a beta
contraction, so the Bellman residual of the fixed point is below beta * tol.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import C_FLOOR, IncomeState, ModelParams, params_from_mapping, params_to_mapping, utility
from .errors import NoConvergence

_STATES = (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED)


@dataclass(frozen=True, eq=False)
class RationalSolution:
    """Converged value function, savings policy, and continuation value.

    Arrays are indexed [income_state, asset_node] with income following
    IncomeState (0 employed, 1 unemployed).  ev[y, j] is the expected next
    value E[V(a'_j, y') | y] of saving a'_j, on the same asset grid.
    """

    params: ModelParams
    asset_grid: np.ndarray
    v: np.ndarray
    policy: np.ndarray
    ev: np.ndarray
    n_iterations: int
    final_delta: float

    def value_at(self, y: IncomeState, assets) -> np.ndarray | float:
        return np.interp(assets, self.asset_grid, self.v[int(y)])

    def ev_at(self, y: IncomeState, a_next) -> np.ndarray | float:
        """Continuation value of saving a_next out of income state y."""
        return np.interp(a_next, self.asset_grid, self.ev[int(y)])

    def savings_at(self, y: IncomeState, assets) -> np.ndarray | float:
        return np.interp(assets, self.asset_grid, self.policy[int(y)])

    def consumption_at(self, y: IncomeState, assets) -> np.ndarray | float:
        """Consumption implied by the interpolated grid policy."""
        p = self.params
        x = p.income_value(y) + p.gross_return * np.asarray(assets, dtype=float)
        return x - self.savings_at(y, assets)

    def bellman_residual(self) -> float:
        """Sup-norm of T V - V recomputed from scratch on the stored solution."""
        v_next, _ = _bellman_sweep(self.params, self.asset_grid, self.v)
        return float(np.max(np.abs(v_next - self.v)))


def _utility_tensor(p: ModelParams, asset_grid: np.ndarray, sav: np.ndarray) -> np.ndarray:
    """Flow utility of every (income, asset node, savings choice); -inf if infeasible."""
    util = np.empty((2, asset_grid.size, sav.size))
    for y in _STATES:
        x = p.income_value(y) + p.gross_return * asset_grid
        c = x[:, None] - sav[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            util[int(y)] = np.where(c > C_FLOOR, utility(np.maximum(c, C_FLOOR)), -np.inf)
    return util


def _bellman_sweep(p: ModelParams, asset_grid: np.ndarray, v: np.ndarray,
                   sav: np.ndarray | None = None, util: np.ndarray | None = None):
    """One application of the Bellman operator; returns (V_new, argmax indices).

    The flow-utility tensor is the expensive part; callers iterating to a
    fixed point precompute it once and pass it in.
    """
    if sav is None:
        sav = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    if util is None:
        util = _utility_tensor(p, asset_grid, sav)
    pm = p.transition.matrix()
    w = np.empty((2, sav.size))
    for y in _STATES:
        w[int(y)] = np.interp(sav, asset_grid, v[int(y)])
    v_new = np.empty_like(v)
    idx = np.empty((2, asset_grid.size), dtype=np.intp)
    for y in _STATES:
        i = int(y)
        obj = util[i] + p.beta * (pm[i, 0] * w[0] + pm[i, 1] * w[1])[None, :]
        idx[i] = np.argmax(obj, axis=1)
        v_new[i] = obj[np.arange(asset_grid.size), idx[i]]
    return v_new, idx


def solve_value_iteration(
    p: ModelParams, tol: float = 1e-9, max_iter: int = 10_000
) -> RationalSolution:
    """Iterate the Bellman operator to a fixed point.

    Raises NoConvergence if max_iter sweeps do not bring the sup-norm change
    below tol.  Ties in the choice argmax resolve to the lowest savings point.
    """
    asset_grid = np.linspace(p.a_min, p.a_max, p.train_grid_n)
    sav = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    util = _utility_tensor(p, asset_grid, sav)
    # Consume-everything value as a finite, shape-correct starting guess.
    v = np.empty((2, asset_grid.size))
    for y in _STATES:
        x = p.income_value(y) + p.gross_return * asset_grid
        v[int(y)] = utility(x) / (1.0 - p.beta) if p.beta < 1.0 else utility(x)

    delta = np.inf
    for it in range(1, max_iter + 1):
        v_new, idx = _bellman_sweep(p, asset_grid, v, sav, util)
        delta = float(np.max(np.abs(v_new - v)))
        v = v_new
        if delta < tol:
            break
    else:
        raise NoConvergence(f"value iteration: delta={delta:.3e} after {max_iter} sweeps")

    policy = sav[idx]
    pm = p.transition.matrix()
    ev = pm @ v  # asset grid doubles as the a' grid
    return RationalSolution(
        params=p, asset_grid=asset_grid, v=v, policy=policy, ev=ev,
        n_iterations=it, final_delta=delta,
    )


# --- continuous policy refinement -------------------------------------------
#
# The grid policy carries O(grid step) argmax noise, which pollutes MPC curves
# computed as finite differences.  Between asset nodes the continuation value
# is piecewise linear with slope m, so the first-order condition of
# log(x - s) + beta * (ev_j + m (s - g_j)) gives s* = x - 1 / (beta m) inside
# a segment.  Evaluating all knots plus per-segment interior roots recovers
# the exact maximizer of the interpolated problem.


def savings_refined(sol: RationalSolution, y: IncomeState, assets) -> np.ndarray | float:
    p = sol.params
    grid = sol.asset_grid
    evy = sol.ev[int(y)]
    slopes = np.diff(evy) / np.diff(grid)
    scalar = np.isscalar(assets) or np.ndim(assets) == 0
    a_arr = np.atleast_1d(np.asarray(assets, dtype=float))
    out = np.empty_like(a_arr)
    for n, a in enumerate(a_arr):
        x = p.income_value(y) + p.gross_return * a
        cands = [grid[grid < x - C_FLOOR]]
        if p.beta > 0.0:
            pos = slopes > 0.0
            roots = np.full(slopes.size, np.nan)
            roots[pos] = x - 1.0 / (p.beta * slopes[pos])
            ok = pos & (roots >= grid[:-1]) & (roots <= grid[1:]) & (roots < x - C_FLOOR)
            cands.append(roots[ok])
        s = np.concatenate(cands)
        if s.size == 0:
            out[n] = p.a_min
            continue
        f = utility(x - s) + p.beta * np.interp(s, grid, evy)
        best = np.max(f)
        out[n] = float(np.min(s[f >= best - 1e-13]))  # ties -> smallest savings
    return float(out[0]) if scalar else out


def consumption_refined(sol: RationalSolution, y: IncomeState, assets) -> np.ndarray | float:
    p = sol.params
    x = p.income_value(y) + p.gross_return * np.asarray(assets, dtype=float)
    return x - savings_refined(sol, y, assets)


def mpc_refined(sol: RationalSolution, y: IncomeState, assets, tau: float | None = None):
    """Marginal propensity to consume out of a one-off asset transfer tau."""
    tau = sol.params.transfer if tau is None else tau
    c0 = consumption_refined(sol, y, assets)
    c1 = consumption_refined(sol, y, np.asarray(assets, dtype=float) + tau)
    return (c1 - c0) / tau


# --- serialization -----------------------------------------------------------


def save_solution(sol: RationalSolution, path: str | Path) -> None:
    """Write the solution as columnar text: asset, income, v, policy, ev."""
    meta = {
        "kind": "rational-solution",
        "version": 1,
        "params": params_to_mapping(sol.params),
        "n_iterations": sol.n_iterations,
        "final_delta": sol.final_delta,
    }
    lines = ["# " + json.dumps(meta, sort_keys=True), "asset,income,v,policy,ev"]
    for y in _STATES:
        i = int(y)
        for j, a in enumerate(sol.asset_grid):
            lines.append(
                f"{a:.17g},{i},{sol.v[i, j]:.17g},{sol.policy[i, j]:.17g},{sol.ev[i, j]:.17g}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_solution(path: str | Path) -> RationalSolution:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    meta = json.loads(text[0].lstrip("# "))
    p = params_from_mapping({k: str(v) for k, v in meta["params"].items()})
    rows = np.array([[float(f) for f in line.split(",")] for line in text[2:]])
    na = rows.shape[0] // 2
    grid = rows[:na, 0]
    v = np.stack([rows[:na, 2], rows[na:, 2]])
    policy = np.stack([rows[:na, 3], rows[na:, 3]])
    ev = np.stack([rows[:na, 4], rows[na:, 4]])
    return RationalSolution(
        params=p, asset_grid=grid, v=v, policy=policy, ev=ev,
        n_iterations=int(meta["n_iterations"]), final_delta=float(meta["final_delta"]),
    )
