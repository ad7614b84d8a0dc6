"""Boundedly rational agent: greedy savings choice and TD learning.

The agent prices a choice a' in state (a, y) as

    Q(a, y, a') = log(R a + y - a') + beta * EV(y, a'; phi)

and picks the feasible grid maximizer.  After observing the realized income
state y' it computes the temporal-difference error

    eps = beta * [ max_{a''} Q(a', y', a'') - EV(y, a'; phi) ]

and takes one optimizer step with step size lambda_t = lambda_0 / sqrt(t)
(plain SGD by default; ADAM behind optimizer="adam", see make_agent).  Two
sign conventions exist for the gradient fed in, switched by
literal_update_sign:

  True (default)   feed +eps * dEV/dphi, so a worse-than-expected realization
                   (eps < 0) RAISES the continuation estimate at the savings
                   level just chosen.  Saving there looks better afterwards,
                   consumption tilts down: the precautionary, scarring-
                   generating update, and the sign the headline experiments
                   need.
  False            feed -eps * dEV/dphi, the textbook semi-gradient of
                   1/2 eps^2: the estimate moves toward the realized target
                   (down after bad news).  Kept as an ablation.

Learning always evaluates the raw network; polynomial smoothing exists only
for display policies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import C_FLOOR, IncomeState, ModelParams, utility
from .errors import FrozenAgent, InfeasibleChoice, NoFeasibleChoice
from .neuralnet import AdamState, EVModel, adam_step, flatten, forward, forward_batch, grad_params, init_adam, n_params, unflatten
from .polysmooth import fit_poly, smoothed_ev


@dataclass(frozen=True)
class Transition:
    """One lived period: state (assets, income), choice savings, realized next_income."""

    assets: float
    income: IncomeState
    savings: float
    next_income: IncomeState


@dataclass(frozen=True)
class HistoryRecord:
    assets: float
    income: IncomeState
    savings: float
    consumption: float
    td_error: float


OPTIMIZERS = ("sgd", "adam")


@dataclass
class LearningAgent:
    """Mutable learner state: network, optimizer moments, decay clock, history."""

    model: EVModel
    adam: AdamState
    t: int = 1
    frozen: bool = False
    literal_update_sign: bool = True
    optimizer: str = "sgd"
    history: list[HistoryRecord] = field(default_factory=list)


def make_agent(pretrained: EVModel, literal_update_sign: bool = True,
               optimizer: str = "sgd") -> LearningAgent:
    """Fresh learner from a pretrained network.

    optimizer selects how the fed gradient becomes a parameter step.  "sgd"
    (default) takes the plain Robbins-Monro step lambda_t * gradient, the
    only variant whose policies drift back toward the rational benchmark in
    long simulations and whose liquidity-MPC profile decays over time.
    "adam" normalizes per coordinate; its near-constant-magnitude steps keep
    perturbing the network at every scale, which inverts the early liquidity
    profile and prevents long-run convergence.  Kept for ablation.
    """
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {optimizer!r}")
    return LearningAgent(
        model=pretrained.copy(),
        adam=init_adam(n_params(pretrained.hidden_dim)),
        literal_update_sign=literal_update_sign,
        optimizer=optimizer,
    )


def q_value(model: EVModel, p: ModelParams, assets: float, y: IncomeState, a_next: float) -> float:
    c = p.cash_on_hand(assets, y) - a_next
    if c <= C_FLOOR:
        raise InfeasibleChoice(f"savings {a_next} leaves consumption {c} <= floor")
    return float(utility(c)) + p.beta * forward(model, p.income_value(y), a_next)


def _feasible_count(x: float, grid: np.ndarray) -> int:
    return int(np.searchsorted(grid, x - C_FLOOR, side="left"))


def _greedy(model: EVModel, p: ModelParams, assets: float, y: IncomeState,
            grid: np.ndarray, use_smoothed: bool):
    """Index of the Q-maximizing feasible grid point (ties -> lowest index)."""
    x = p.cash_on_hand(assets, y)
    n_feas = _feasible_count(x, grid)
    if n_feas == 0:
        raise NoFeasibleChoice(f"cash on hand {x} leaves no feasible savings point")
    feas = grid[:n_feas]
    if use_smoothed:
        ev = smoothed_ev(fit_poly(model, p), y, feas)
    else:
        ev = forward_batch(model, p.income_value(y), feas)
    q = utility(x - feas) + p.beta * ev
    return int(np.argmax(q)), q


def choose_savings(agent: LearningAgent, p: ModelParams, assets: float, y: IncomeState,
                   use_smoothed: bool = False, grid: np.ndarray | None = None) -> float:
    """Greedy savings choice.  Pure: never advances the learning state."""
    if grid is None:
        grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    idx, _ = _greedy(agent.model, p, assets, y, grid, use_smoothed)
    return float(grid[idx])


def max_q(model: EVModel, p: ModelParams, assets: float, y: IncomeState,
          grid: np.ndarray | None = None) -> float:
    """max over feasible a'' of Q(assets, y, a''), always against the raw network."""
    if grid is None:
        grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    idx, q = _greedy(model, p, assets, y, grid, use_smoothed=False)
    return float(q[idx])


def td_error(agent: LearningAgent, p: ModelParams, tr: Transition,
             grid: np.ndarray | None = None) -> float:
    """Realized one-step surprise, scaled by beta.

    Algebraically identical (to rounding) to the empirical-Q form
    Q_emp - Q = [u(c) + beta max Q(a', y', .)] - [u(c) + beta EV(y, a')]:
    the flow utility cancels, leaving the continuation-value gap.
    """
    best = max_q(agent.model, p, tr.savings, tr.next_income, grid)
    ev_own = forward(agent.model, p.income_value(tr.income), tr.savings)
    return p.beta * (best - ev_own)


def learn_step(agent: LearningAgent, p: ModelParams, tr: Transition,
               grid: np.ndarray | None = None) -> float:
    """One night of learning: TD error, optimizer step, history append.

    The step size decays as learning_rate / t**lr_decay_exponent on the
    agent's own clock, which starts at 1 and advances once per call.  Returns
    the TD error.  Raises FrozenAgent while the agent is frozen for
    measurement.
    """
    if agent.frozen:
        raise FrozenAgent("learn_step called on a frozen agent")
    eps = td_error(agent, p, tr, grid)
    g = grad_params(agent.model, p.income_value(tr.income), tr.savings)
    sign = 1.0 if agent.literal_update_sign else -1.0
    lr = p.learning_rate / agent.t ** p.lr_decay_exponent
    fed = sign * eps * g
    if agent.optimizer == "sgd":
        phi = flatten(agent.model) - lr * fed
    else:
        phi, agent.adam = adam_step(agent.adam, flatten(agent.model), fed, lr)
    agent.model = unflatten(phi, agent.model.hidden_dim)
    consumption = p.cash_on_hand(tr.assets, tr.income) - tr.savings
    agent.history.append(HistoryRecord(tr.assets, tr.income, tr.savings, consumption, eps))
    agent.t += 1
    return eps


def mpc(agent: LearningAgent, p: ModelParams, assets: float, y: IncomeState,
        tau: float | None = None, use_smoothed: bool = False,
        grid: np.ndarray | None = None) -> float:
    """Marginal propensity to consume out of a transfer tau at the current policy.

    Pure: safe to call on a frozen agent; never updates parameters.
    """
    tau = p.transfer if tau is None else tau
    if grid is None:
        grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    s0 = choose_savings(agent, p, assets, y, use_smoothed, grid)
    s1 = choose_savings(agent, p, assets + tau, y, use_smoothed, grid)
    c0 = p.cash_on_hand(assets, y) - s0
    c1 = p.cash_on_hand(assets + tau, y) - s1
    return (c1 - c0) / tau
