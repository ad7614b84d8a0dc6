"""Domain types shared by every other module.

The model is a two-state income consumption-savings problem: an agent holds
assets a, receives income y (employed or unemployed), and splits cash on hand
x = y + R * a between consumption and next-period assets a'.  Utility is
log(c), borrowing is not allowed, and beta * R < 1 so rational agents run
assets down toward a buffer stock.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import BetaRViolation, ConfigError, GridError, ProbabilityError

logger = logging.getLogger(__name__)

# Consumption at or below this floor is infeasible (log utility diverges).
C_FLOOR = 1e-10


def utility(c):
    """Flow utility log(c).  Accepts scalars or arrays; c must exceed C_FLOOR."""
    return np.log(c)


class IncomeState(IntEnum):
    EMPLOYED = 0
    UNEMPLOYED = 1


@dataclass(frozen=True)
class IncomeTransition:
    """Two-state Markov transition probabilities.

    Rows are conditioned on the current state: (p_ee, p_eu) from employment,
    (p_ue, p_uu) from unemployment.  Rows need not sum to one on input;
    validate_params renormalizes them.
    """

    p_ee: float = 0.939
    p_eu: float = 0.0607
    p_ue: float = 0.392
    p_uu: float = 0.608

    def matrix(self) -> np.ndarray:
        return np.array([[self.p_ee, self.p_eu], [self.p_ue, self.p_uu]])

    def row_sums(self) -> np.ndarray:
        return self.matrix().sum(axis=1)

    def normalized(self) -> "IncomeTransition":
        """Divide each row by its sum so rows sum to one exactly."""
        sums = self.row_sums()
        if np.any(sums <= 0.0):
            raise ProbabilityError(f"transition row sums {sums} cannot be normalized")
        m = self.matrix() / sums[:, None]
        return IncomeTransition(p_ee=m[0, 0], p_eu=m[0, 1], p_ue=m[1, 0], p_uu=m[1, 1])

    def stationary(self) -> np.ndarray:
        """Stationary distribution (pi_employed, pi_unemployed) of the normalized chain."""
        m = self.normalized().matrix()
        denom = m[0, 1] + m[1, 0]
        if denom <= 0.0:
            # Two absorbing states; split mass evenly by convention.
            return np.array([0.5, 0.5])
        pi_e = m[1, 0] / denom
        return np.array([pi_e, 1.0 - pi_e])


@dataclass(frozen=True)
class ModelParams:
    """All scalar parameters of the model and the learning setup.

    Defaults reproduce the baseline quarterly calibration, so a fully default
    instance (or an empty config file) runs the reference experiment.
    """

    beta: float = 0.9703
    gross_return: float = 1.00985
    income_employed: float = 1.0
    income_unemployed: float = 0.472
    transition: IncomeTransition = field(default_factory=IncomeTransition)
    a_min: float = 0.0
    a_max: float = 4.5
    savings_grid_n: int = 8750
    train_grid_n: int = 500
    transfer: float = 0.784
    n_agents: int = 50
    n_periods: int = 50
    learning_rate: float = 1.1e-3
    lr_decay_exponent: float = 0.5
    hidden_dim: int = 80
    hidden_layers: int = 2
    pretrain_tolerance: float = 2.5e-3
    poly_degree: int = 5
    poly_eval_n: int = 50
    seed: int = 0

    def income_value(self, y: IncomeState) -> float:
        return self.income_employed if y == IncomeState.EMPLOYED else self.income_unemployed

    def cash_on_hand(self, assets: float, y: IncomeState) -> float:
        return self.income_value(y) + self.gross_return * assets


def validate_params(p: ModelParams) -> ModelParams:
    """Check invariants and return a copy with the transition rows normalized.

    Raises ProbabilityError, BetaRViolation, or GridError on violations.  A
    renormalization larger than 1e-12 in any entry is logged, not fatal: the
    published transition rows sum to 0.9997 and 1.0 and are adjusted here.
    """
    m = p.transition.matrix()
    if np.any(m < 0.0) or np.any(m > 1.0):
        raise ProbabilityError(f"transition entries outside [0, 1]: {m.tolist()}")
    if not (0.0 < p.beta < 1.0):
        raise BetaRViolation(f"beta={p.beta} outside (0, 1)")
    if p.beta * p.gross_return >= 1.0:
        raise BetaRViolation(
            f"beta * R = {p.beta * p.gross_return:.6f} >= 1; model requires impatience"
        )
    if not (p.a_min < p.a_max):
        raise GridError(f"a_min={p.a_min} must be below a_max={p.a_max}")
    if p.a_min < 0.0:
        raise GridError(f"a_min={p.a_min} negative; borrowing is not allowed")
    if p.savings_grid_n < 2 or p.train_grid_n < 2 or p.poly_eval_n < 2:
        raise GridError("grids need at least two points")
    if p.income_unemployed <= 0.0 or p.income_employed <= 0.0:
        raise ConfigError("income values must be positive")
    if p.income_unemployed >= p.income_employed:
        raise ConfigError("unemployment income must lie below employment income")
    if p.transfer <= 0.0:
        raise ConfigError(f"transfer={p.transfer} must be positive")
    if p.n_agents < 1 or p.n_periods < 0:
        raise ConfigError("population size must be >= 1 and horizon >= 0")
    if p.learning_rate <= 0.0 or p.pretrain_tolerance <= 0.0:
        raise ConfigError("learning rates and tolerances must be positive")
    if p.lr_decay_exponent <= 0.0:
        raise ConfigError("lr_decay_exponent must be positive for step sizes to vanish")
    if p.hidden_dim < 1 or p.poly_degree < 1:
        raise ConfigError("hidden_dim and poly_degree must be >= 1")
    if p.hidden_layers != 2:
        raise ConfigError("the network is written for exactly two hidden layers")

    normalized = p.transition.normalized()
    drift = np.max(np.abs(normalized.matrix() - m))
    if drift > 1e-12:
        logger.info("transition rows renormalized (max adjustment %.3e)", drift)
    return replace(p, transition=normalized)


def pessimism_transform(t: IncomeTransition, factor: float) -> IncomeTransition:
    """Scale both into-unemployment probabilities by factor, then renormalize rows.

    factor > 1 produces beliefs that overweight unemployment; factor = 1 is the
    identity up to row normalization.
    """
    if factor <= 0.0:
        raise ProbabilityError(f"pessimism factor {factor} must be positive")
    scaled = IncomeTransition(
        p_ee=t.p_ee, p_eu=t.p_eu * factor, p_ue=t.p_ue, p_uu=t.p_uu * factor
    )
    return scaled.normalized()


def transition_sample(t: IncomeTransition, y: IncomeState, rng: np.random.Generator) -> IncomeState:
    """Draw next period's income state.  Consumes exactly one uniform."""
    m = t.matrix()
    p_to_employed = m[int(y), 0]
    u = rng.random()
    return IncomeState.EMPLOYED if u < p_to_employed else IncomeState.UNEMPLOYED


@dataclass(frozen=True, eq=False)
class SavingsGrid:
    """Uniform grid of admissible savings choices on [a_min, a_max]."""

    points: np.ndarray

    @classmethod
    def uniform(cls, p: ModelParams) -> "SavingsGrid":
        return cls(points=np.linspace(p.a_min, p.a_max, p.savings_grid_n))

    def __post_init__(self):
        pts = self.points
        if pts.ndim != 1 or pts.size < 2:
            raise GridError("savings grid must be a 1-D array with >= 2 points")
        if np.any(np.diff(pts) <= 0.0):
            raise GridError("savings grid must be strictly increasing")

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class AgentState:
    """Point-in-time state (assets, income); cash on hand is derived, never stored stale."""

    assets: float
    income: IncomeState
    cash_on_hand: float

    @classmethod
    def make(cls, p: ModelParams, assets: float, income: IncomeState) -> "AgentState":
        if assets < p.a_min:
            raise GridError(f"assets {assets} below lower bound {p.a_min}")
        return cls(assets=assets, income=income, cash_on_hand=p.cash_on_hand(assets, income))


def eval_asset_grid(p: ModelParams, n: int | None = None, extend: bool = True) -> np.ndarray:
    """Asset grid used for policy and MPC curves.

    Extends past a_max by the transfer size so that the shifted point of an
    MPC evaluated at a_max stays on the curve; the savings choice set itself
    never extends.
    """
    hi = p.a_max + p.transfer if extend else p.a_max
    return np.linspace(p.a_min, hi, p.poly_eval_n if n is None else n)


# --- flat key-value config -------------------------------------------------
#
# Config files are plain UTF-8 text, one "key = value" per line, # comments.
# Keys are exactly the ModelParams field names (transition flattened to
# p_ee/p_eu/p_ue/p_uu).  An empty file reproduces the baseline run.

_FLOAT_KEYS = {
    "beta", "gross_return", "income_employed", "income_unemployed",
    "a_min", "a_max", "transfer", "learning_rate", "lr_decay_exponent",
    "pretrain_tolerance",
}
_INT_KEYS = {
    "savings_grid_n", "train_grid_n", "n_agents", "n_periods",
    "hidden_dim", "hidden_layers", "poly_degree", "poly_eval_n", "seed",
}
_TRANSITION_KEYS = {"p_ee", "p_eu", "p_ue", "p_uu"}

PARAM_KEYS = _FLOAT_KEYS | _INT_KEYS | _TRANSITION_KEYS


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse flat key = value lines into a string dict; later keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        out[key] = value
    return out


def params_from_mapping(kv: dict[str, str]) -> ModelParams:
    """Build ModelParams from the param subset of a parsed config mapping.

    Non-parameter keys are ignored here (the CLI layer owns them).  Malformed
    numbers raise ConfigError.
    """
    kwargs: dict = {}
    trans: dict[str, float] = {}
    for key, value in kv.items():
        try:
            if key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _TRANSITION_KEYS:
                trans[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key}={value!r}: {exc}") from None
    if trans:
        kwargs["transition"] = replace(IncomeTransition(), **trans)
    return ModelParams(**kwargs)


def load_params(path: str | Path) -> ModelParams:
    """Read a config file and return validated parameters."""
    text = Path(path).read_text(encoding="utf-8")
    return validate_params(params_from_mapping(parse_kv_text(text)))


def params_to_mapping(p: ModelParams) -> dict:
    """Flatten params to plain JSON-able dict (inverse of params_from_mapping)."""
    out = {}
    for f in fields(p):
        v = getattr(p, f.name)
        if isinstance(v, IncomeTransition):
            out.update(p_ee=v.p_ee, p_eu=v.p_eu, p_ue=v.p_ue, p_uu=v.p_uu)
        else:
            out[f.name] = v
    return out
