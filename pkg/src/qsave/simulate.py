"""Population simulation and the four headline experiments.

A run covers n_agents independent learners for n_periods.  Each period has a
day phase (observe (a, y), pick savings greedily) and a night phase (income
state realizes, the agent computes its TD error and takes one learning step).
Every agent draws from its own RNG stream derived from (master seed,
agent_id), so trajectories are reproducible bit-for-bit and independent of
population size or visit order.

MPC measurement freezes the agent (no learning), queries consumption at
assets and assets + transfer against the current raw network, then unfreezes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .agent import (
    HistoryRecord,
    LearningAgent,
    Transition,
    choose_savings,
    learn_step,
    make_agent,
    mpc,
)
from .analytics import experience_index
from .core import (
    IncomeState,
    ModelParams,
    eval_asset_grid,
    params_to_mapping,
    pessimism_transform,
    transition_sample,
)
from .errors import ConfigError, DegenerateSample, GridError
from .neuralnet import EVModel
from .rational import RationalSolution, consumption_refined, mpc_refined, solve_value_iteration

PANEL_COLUMNS = [
    "agent_id", "t", "assets", "income_state", "savings", "consumption",
    "td_error", "experience_index", "liquidity_class", "seed",
]


# --- initial assets -----------------------------------------------------------


@dataclass(frozen=True)
class ScfDistribution:
    """Initial-asset distribution: linear inverse CDF through survey percentiles,
    spliced with a Pareto upper tail above the 87.5th percentile.

    Values are liquid assets in units of quarterly income.  The tail index is
    pinned by the 95th percentile: alpha = -ln(1 - 0.95) / ln(q95 / q87_5).
    """

    q12_5: float = 0.0553
    q37_5: float = 0.3318
    q62_5: float = 1.0506
    q87_5: float = 3.3178
    q95: float = 6.0827

    def __post_init__(self):
        qs = (self.q12_5, self.q37_5, self.q62_5, self.q87_5, self.q95)
        if any(q < 0.0 for q in qs) or any(b < a for a, b in zip(qs, qs[1:])):
            raise GridError(f"SCF percentile values must be nonnegative and nondecreasing: {qs}")
        if self.q87_5 <= 0.0 or self.q95 <= self.q87_5:
            raise GridError("Pareto tail needs 0 < q87_5 < q95")

    @property
    def pareto_alpha(self) -> float:
        return -np.log(1.0 - 0.95) / np.log(self.q95 / self.q87_5)

    def inverse_cdf(self, u) -> np.ndarray | float:
        """Quantile function; exact at the anchor percentiles and continuous
        at the splice (u = 0.875 maps to q87_5 from both branches)."""
        u_arr = np.asarray(u, dtype=float)
        knots_u = np.array([0.0, 0.125, 0.375, 0.625, 0.875])
        knots_q = np.array([0.0, self.q12_5, self.q37_5, self.q62_5, self.q87_5])
        body = np.interp(u_arr, knots_u, knots_q)
        frac = np.clip((u_arr - 0.875) / 0.125, 0.0, 1.0 - 1e-15)
        tail = self.q87_5 * (1.0 - frac) ** (-1.0 / self.pareto_alpha)
        out = np.where(u_arr <= 0.875, body, tail)
        return float(out) if np.isscalar(u) else out

    def median(self) -> float:
        return float(self.inverse_cdf(0.5))


def sample_initial_assets(d: ScfDistribution, rng: np.random.Generator) -> float:
    """Inverse-transform draw; consumes exactly one uniform."""
    return float(d.inverse_cdf(rng.random()))


# --- population run -----------------------------------------------------------


@dataclass(eq=False)
class PopulationRun:
    params: ModelParams
    seed: int
    panel: pd.DataFrame
    mpc_rows: pd.DataFrame
    agents: list[LearningAgent] = field(default_factory=list)


@dataclass(eq=False)
class ExperimentResult:
    """Uniform container for experiment outputs: scalar stats plus raw tables."""

    name: str
    stats: dict
    tables: dict[str, pd.DataFrame]
    config: dict


def _initial_state(p: ModelParams, d: ScfDistribution, rng: np.random.Generator,
                   all_employed: bool) -> tuple[float, IncomeState]:
    a0 = sample_initial_assets(d, rng)
    if all_employed:
        return a0, IncomeState.EMPLOYED
    pi_e = p.transition.stationary()[0]
    y0 = IncomeState.EMPLOYED if rng.random() < pi_e else IncomeState.UNEMPLOYED
    return a0, y0


def _experience_column(income_codes: list[int]) -> list[float]:
    """Unemployment experience index per row; NaN before four periods of clock."""
    flags = [1.0 if code == int(IncomeState.UNEMPLOYED) else 0.0 for code in income_codes]
    out = []
    for row in range(len(flags)):
        clock = row + 1
        out.append(float(experience_index(flags, clock)) if clock >= 4 else np.nan)
    return out


def run_population(
    p: ModelParams,
    d: ScfDistribution,
    pretrained: EVModel,
    seed: int,
    classify_at: int = 0,
    literal_update_sign: bool = True,
    all_employed: bool = False,
    measure_mpc: bool = True,
    freeze_window: tuple[int, int] | None = None,
    optimizer: str = "sgd",
) -> PopulationRun:
    """Simulate the full population once.

    When freeze_window = (t0, t1) is given, agents are frozen for those
    periods inclusive: they still choose savings and transition, but take no
    learning step, so parameters (and the decay clock, which counts learning
    steps) are held fixed across the window.  MPCs are measured for every
    unemployed agent-period inside the window, or, without a window, at every
    unemployed agent-period.  The returned panel carries the liquidity class
    from a median-asset split at classify_at; experiments may re-split at
    other dates from the raw data.
    """
    grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    streams = np.random.SeedSequence(seed).spawn(p.n_agents)
    rows: list[dict] = []
    mpc_recs: list[dict] = []
    agents: list[LearningAgent] = []

    def in_window(t: int) -> bool:
        return freeze_window is not None and freeze_window[0] <= t <= freeze_window[1]

    for agent_id in range(p.n_agents):
        rng = np.random.default_rng(streams[agent_id])
        a, y = _initial_state(p, d, rng, all_employed)
        ag = make_agent(pretrained, literal_update_sign=literal_update_sign,
                        optimizer=optimizer)
        if p.n_periods == 0:
            rows.append(dict(agent_id=agent_id, t=0, assets=a, income_state=int(y),
                             savings=np.nan, consumption=np.nan, td_error=np.nan))
        for t in range(p.n_periods):
            frozen_now = in_window(t)
            ag.frozen = frozen_now
            s = choose_savings(ag, p, a, y, grid=grid)
            want_mpc = measure_mpc and (frozen_now if freeze_window is not None else True)
            if want_mpc and y == IncomeState.UNEMPLOYED:
                m = mpc(ag, p, a, y, grid=grid)
                mpc_recs.append(dict(agent_id=agent_id, t=t, assets=a,
                                     income_state=int(y), mpc=m, seed=seed))
            y_next = transition_sample(p.transition, y, rng)
            if frozen_now:
                # Frozen period: lived but unlearned.  Panel row is appended by
                # hand; the TD error is never computed, parameters never move.
                c = p.cash_on_hand(a, y) - s
                ag.history.append(HistoryRecord(a, y, s, c, np.nan))
            else:
                learn_step(ag, p, Transition(a, y, s, y_next), grid=grid)
            a, y = s, y_next
        ag.frozen = False
        agents.append(ag)
        income_codes = []
        for t, rec in enumerate(ag.history):
            income_codes.append(int(rec.income))
            rows.append(dict(agent_id=agent_id, t=t, assets=rec.assets,
                             income_state=int(rec.income), savings=rec.savings,
                             consumption=rec.consumption, td_error=rec.td_error))
        for t, uep in enumerate(_experience_column(income_codes)):
            rows[len(rows) - len(income_codes) + t]["experience_index"] = uep

    panel = pd.DataFrame(rows)
    if "experience_index" not in panel.columns:
        panel["experience_index"] = np.nan
    panel["seed"] = seed
    panel["liquidity_class"] = _liquidity_class(panel, min(classify_at, max(p.n_periods - 1, 0)))
    panel = panel[PANEL_COLUMNS]
    mpc_frame = pd.DataFrame(mpc_recs, columns=["agent_id", "t", "assets", "income_state", "mpc", "seed"])
    return PopulationRun(params=p, seed=seed, panel=panel, mpc_rows=mpc_frame, agents=agents)


def _liquidity_class(panel: pd.DataFrame, classify_at: int) -> pd.Series:
    at = panel[panel["t"] == classify_at][["agent_id", "assets"]]
    if at.empty:
        return pd.Series(["low"] * len(panel), index=panel.index)
    median = float(at["assets"].median())
    label = {row.agent_id: ("low" if row.assets <= median else "high")
             for row in at.itertuples()}
    return panel["agent_id"].map(label)


# --- liquidity MPC experiment ---------------------------------------------------


def mpc_experiment(
    p: ModelParams,
    d: ScfDistribution,
    pretrained: EVModel,
    classify_at: int = 0,
    seed: int = 0,
    literal_update_sign: bool = True,
    all_employed: bool = False,
    optimizer: str = "sgd",
) -> ExperimentResult:
    """Median-asset split at classify_at; MPCs of agents unemployed 8 and 9
    periods later, compared across the two liquidity groups.

    Runs its own population: the two measurement periods form a freeze window
    (no learning inside it), so both readings per agent come off the same
    parameters.  Each classification date therefore has its own simulation.
    """
    from .analytics import welch_t  # local import keeps module load order simple

    if classify_at < 0 or classify_at + 9 > p.n_periods:
        raise ConfigError(
            f"classify_at={classify_at} needs classify_at + 9 <= n_periods={p.n_periods}"
        )
    window = (classify_at + 8, classify_at + 9)
    run = run_population(
        p, d, pretrained, seed=seed, classify_at=classify_at,
        literal_update_sign=literal_update_sign, all_employed=all_employed,
        measure_mpc=True, freeze_window=window, optimizer=optimizer,
    )
    at = run.panel[run.panel["t"] == classify_at][["agent_id", "assets"]]
    median = float(at["assets"].median())
    label = {r.agent_id: ("low" if r.assets <= median else "high") for r in at.itertuples()}
    meas = run.mpc_rows[run.mpc_rows["t"].isin([window[0], window[1]])].copy()
    meas["liquidity_class"] = meas["agent_id"].map(label)

    low = meas.loc[meas["liquidity_class"] == "low", "mpc"].to_numpy()
    high = meas.loc[meas["liquidity_class"] == "high", "mpc"].to_numpy()
    stats = {
        "classify_at": classify_at,
        "median_assets": median,
        "n_low": int(low.size), "n_high": int(high.size),
        "mpc_low": float(low.mean()) if low.size else np.nan,
        "mpc_high": float(high.mean()) if high.size else np.nan,
        "difference": (float(low.mean() - high.mean())
                       if low.size and high.size else np.nan),
        "t_stat": np.nan, "df": np.nan, "p_value": np.nan, "stars": "",
        "note": "",
    }
    if low.size == 0 or high.size == 0:
        # Empty groups are reported, not fatal: with 50 agents the 2-period
        # unemployment window can miss one liquidity group entirely.
        stats["note"] = (
            f"EmptyGroup: no unemployed agents in one group at "
            f"classify_at={classify_at} (low n={low.size}, high n={high.size})"
        )
    elif low.size >= 2 and high.size >= 2:
        try:
            test = welch_t(low, high)
            stats.update(t_stat=test.t_stat, df=test.df, p_value=test.p_value, stars=test.stars)
        except DegenerateSample:
            pass  # single-seed groups can be too thin; pooled_mpc covers inference
    return ExperimentResult(
        name="mpc", stats=stats, tables={"measurements": meas, "panel": run.panel},
        config=dict(params=params_to_mapping(p), classify_at=classify_at, seed=seed,
                    literal_update_sign=literal_update_sign, optimizer=optimizer),
    )


# --- extreme income shock --------------------------------------------------------


def extreme_shock_experiment(
    p: ModelParams,
    sol: RationalSolution,
    pretrained: EVModel,
    d: ScfDistribution | None = None,
    n_shock: int = 4,
    literal_update_sign: bool = True,
    optimizer: str = "sgd",
) -> ExperimentResult:
    """Twin agents from the median initial asset level, both employed.

    One receives n_shock forced unemployment realizations, the other the same
    number of employment realizations; nothing is random.  Records smoothed
    consumption-policy and MPC curves before learning (label t=0) and after
    the forced spell (label t=n_shock+1), plus the rational benchmark.
    """
    d = d or ScfDistribution()
    a0 = d.median()
    grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    assets_eval = eval_asset_grid(p, extend=False)

    forced = {
        "unemployment": [IncomeState.UNEMPLOYED] * n_shock,
        "employment": [IncomeState.EMPLOYED] * n_shock,
    }
    curves: list[dict] = []

    def record(agent_label: str, t_label: int, ag: LearningAgent) -> None:
        for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
            cons = np.array([
                p.cash_on_hand(a, y) - choose_savings(ag, p, a, y, use_smoothed=True, grid=grid)
                for a in assets_eval
            ])
            mpcs = np.array([
                mpc(ag, p, a, y, use_smoothed=True, grid=grid) for a in assets_eval
            ])
            for a, c, m in zip(assets_eval, cons, mpcs):
                curves.append(dict(t=t_label, agent=agent_label, income_state=int(y),
                                   assets=a, consumption=c, mpc=m))

    results_paths: dict[str, list] = {}
    for label, seq in forced.items():
        ag = make_agent(pretrained, literal_update_sign=literal_update_sign,
                        optimizer=optimizer)
        record(label, 0, ag)
        a, y = a0, IncomeState.EMPLOYED
        path = []
        for y_next in seq:
            s = choose_savings(ag, p, a, y, grid=grid)
            learn_step(ag, p, Transition(a, y, s, y_next), grid=grid)
            path.append(dict(assets=a, income_state=int(y), savings=s))
            a, y = s, y_next
        record(label, n_shock + 1, ag)
        results_paths[label] = path

    for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
        cons = consumption_refined(sol, y, assets_eval)
        mpcs = mpc_refined(sol, y, assets_eval)
        for t_label in (0, n_shock + 1):
            for a, c, m in zip(assets_eval, cons, mpcs):
                curves.append(dict(t=t_label, agent="rational", income_state=int(y),
                                   assets=a, consumption=c, mpc=m))

    frame = pd.DataFrame(curves)
    return ExperimentResult(
        name="extreme", stats={"initial_assets": a0, "n_shock": n_shock},
        tables={"curves": frame},
        config=dict(params=params_to_mapping(p), n_shock=n_shock),
    )


# --- pessimistic beliefs ----------------------------------------------------------


def pessimism_experiment(
    p: ModelParams, factor: float = 1.5, sol: RationalSolution | None = None
) -> ExperimentResult:
    """Rational agents only: consumption and MPC curves under correct beliefs
    versus beliefs with both into-unemployment probabilities scaled up."""
    base = sol or solve_value_iteration(p)
    p_pess = replace(p, transition=pessimism_transform(p.transition, factor))
    pess = solve_value_iteration(p_pess)
    assets_eval = eval_asset_grid(p, extend=True)

    curves = []
    worst_cons = -np.inf
    worst_mpc = -np.inf
    for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
        for label, s in (("baseline", base), ("pessimistic", pess)):
            cons = consumption_refined(s, y, assets_eval)
            mpcs = mpc_refined(s, y, assets_eval)
            for a, c, m in zip(assets_eval, cons, mpcs):
                curves.append(dict(belief=label, income_state=int(y),
                                   assets=a, consumption=c, mpc=m))
        c_b = consumption_refined(base, y, assets_eval)
        c_p = consumption_refined(pess, y, assets_eval)
        m_b = mpc_refined(base, y, assets_eval)
        m_p = mpc_refined(pess, y, assets_eval)
        worst_cons = max(worst_cons, float(np.max(c_p - c_b)))
        worst_mpc = max(worst_mpc, float(np.max(m_p - m_b)))

    return ExperimentResult(
        name="pessimism",
        stats={"factor": factor, "max_consumption_excess": worst_cons,
               "max_mpc_excess": worst_mpc},
        tables={"curves": pd.DataFrame(curves)},
        config=dict(params=params_to_mapping(p), factor=factor),
    )


# --- long-run convergence -----------------------------------------------------------


def long_run_run(
    p: ModelParams,
    sol: RationalSolution,
    pretrained: EVModel,
    d: ScfDistribution,
    seed: int,
    n_periods: int = 240,
    snapshots: tuple[int, ...] = (0, 10, 240),
    literal_update_sign: bool = True,
    optimizer: str = "sgd",
) -> ExperimentResult:
    """Single agent simulated for n_periods; records the sup-norm distance of
    its raw consumption policy from the rational benchmark at snapshot times
    (t = number of learning steps taken).

    The agent starts employed at the median initial asset level, the same
    deterministic starting convention the twin-agent shock experiment uses,
    so seeds differ only in realized income paths.
    """
    grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    assets_eval = eval_asset_grid(p, extend=False)
    bench = {
        y: consumption_refined(sol, y, assets_eval)
        for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED)
    }
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    a, y = d.median(), IncomeState.EMPLOYED
    ag = make_agent(pretrained, literal_update_sign=literal_update_sign,
                    optimizer=optimizer)

    curves = []
    distances: dict[int, float] = {}

    def snapshot(t_label: int) -> None:
        worst = 0.0
        for yy in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
            cons = np.array([
                p.cash_on_hand(av, yy) - choose_savings(ag, p, av, yy, grid=grid)
                for av in assets_eval
            ])
            worst = max(worst, float(np.max(np.abs(cons - bench[yy]))))
            for av, c in zip(assets_eval, cons):
                curves.append(dict(t=t_label, income_state=int(yy), assets=av, consumption=c))
        distances[t_label] = worst

    for t in range(n_periods):
        if t in snapshots:
            snapshot(t)
        s = choose_savings(ag, p, a, y, grid=grid)
        y_next = transition_sample(p.transition, y, rng)
        learn_step(ag, p, Transition(a, y, s, y_next), grid=grid)
        a, y = s, y_next
    if n_periods in snapshots:
        snapshot(n_periods)

    return ExperimentResult(
        name="longrun",
        stats={"seed": seed, "distances": distances},
        tables={"curves": pd.DataFrame(curves)},
        config=dict(params=params_to_mapping(p), seed=seed, n_periods=n_periods,
                    snapshots=list(snapshots)),
    )
