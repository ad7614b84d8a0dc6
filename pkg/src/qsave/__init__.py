"""Consumption-savings model with temporal-difference learning agents.

Agents learn the continuation value of savings with a small ReLU network
updated by TD errors, choose greedily against it, and are compared to a
rational value-iteration benchmark.  See README.md for the full tour.
"""

__version__ = "0.1.0"

from .agent import (
    HistoryRecord,
    LearningAgent,
    Transition,
    choose_savings,
    learn_step,
    make_agent,
    max_q,
    mpc,
    q_value,
    td_error,
)
from .analytics import (
    OlsResult,
    WelchResult,
    experience_index,
    experience_weights,
    mpc_table,
    ols,
    pooled_mpc,
    scarring_regression,
    stars,
    welch_t,
)
from .core import (
    C_FLOOR,
    AgentState,
    IncomeState,
    IncomeTransition,
    ModelParams,
    SavingsGrid,
    eval_asset_grid,
    load_params,
    pessimism_transform,
    transition_sample,
    utility,
    validate_params,
)
from .neuralnet import (
    AdamState,
    EVModel,
    PretrainReport,
    adam_step,
    flatten,
    forward,
    forward_batch,
    grad_params,
    init_adam,
    init_model,
    load_checkpoint,
    n_params,
    pretrain,
    save_checkpoint,
    unflatten,
)
from .polysmooth import PolySmoothedEV, fit_poly, smoothed_ev
from .rational import (
    RationalSolution,
    consumption_refined,
    load_solution,
    mpc_refined,
    save_solution,
    savings_refined,
    solve_value_iteration,
)
from .simulate import (
    ExperimentResult,
    PopulationRun,
    ScfDistribution,
    extreme_shock_experiment,
    long_run_run,
    mpc_experiment,
    pessimism_experiment,
    run_population,
    sample_initial_assets,
)
