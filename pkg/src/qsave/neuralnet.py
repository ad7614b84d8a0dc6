"""Feed-forward approximator of the continuation value EV(y, a').

Architecture: input (income value, savings choice) -> two 80-unit ReLU hidden
layers -> affine scalar output.  The output layer is affine because
continuation values are negative under log utility.  Gradients are exact
backpropagation written out by hand (ReLU subgradient 0 at kinks), updates go
through ADAM, and the flat parameter vector phi concatenates all weight
matrices then all biases in layer order, each raveled row-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import C_FLOOR, IncomeState, ModelParams, eval_asset_grid, utility
from .errors import ConfigError, PretrainFailure
from .rational import RationalSolution

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class EVModel:
    """Weights of the two-hidden-layer network; shapes (h,2), (h,h), (1,h)."""

    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.a0.shape[0]

    def copy(self) -> "EVModel":
        return EVModel(*(x.copy() for x in (self.a0, self.a1, self.a2, self.b0, self.b1, self.b2)))


def n_params(hidden_dim: int) -> int:
    h = hidden_dim
    return 2 * h + h * h + h + h + h + 1


def init_model(hidden_dim: int, rng: np.random.Generator, scale: str = "he") -> EVModel:
    """Gaussian weight init, zero biases.

    scale="he" draws each weight with standard deviation sqrt(2 / fan_in);
    scale="sqrt2" uses a literal standard deviation of sqrt(2) for every
    weight.  The sqrt2 variant makes the 80x80 hidden layer so large that
    minibatch ADAM at the configured rates stalls an order of magnitude short
    of the pretraining tolerance, so it is not the default.
    """
    h = hidden_dim
    if scale == "sqrt2":
        stds = (np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0))
    elif scale == "he":
        stds = (np.sqrt(2.0 / 2.0), np.sqrt(2.0 / h), np.sqrt(2.0 / h))
    else:
        raise ConfigError(f"unknown init scale {scale!r}")
    return EVModel(
        a0=rng.normal(0.0, stds[0], size=(h, 2)),
        a1=rng.normal(0.0, stds[1], size=(h, h)),
        a2=rng.normal(0.0, stds[2], size=(1, h)),
        b0=np.zeros(h),
        b1=np.zeros(h),
        b2=np.zeros(1),
    )


def flatten(model: EVModel) -> np.ndarray:
    return np.concatenate([
        model.a0.ravel(), model.a1.ravel(), model.a2.ravel(),
        model.b0.ravel(), model.b1.ravel(), model.b2.ravel(),
    ])


def unflatten(phi: np.ndarray, hidden_dim: int) -> EVModel:
    h = hidden_dim
    if phi.size != n_params(h):
        raise ConfigError(f"phi has {phi.size} entries, expected {n_params(h)}")
    parts = np.split(phi, np.cumsum([2 * h, h * h, h, h, h]))
    return EVModel(
        a0=parts[0].reshape(h, 2), a1=parts[1].reshape(h, h), a2=parts[2].reshape(1, h),
        b0=parts[3].copy(), b1=parts[4].copy(), b2=parts[5].copy(),
    )


def _forward_cached(model: EVModel, x: np.ndarray):
    """x has shape (2, B).  Returns predictions (B,) and the backprop cache."""
    z0 = model.a0 @ x + model.b0[:, None]
    h0 = np.maximum(z0, 0.0)
    z1 = model.a1 @ h0 + model.b1[:, None]
    h1 = np.maximum(z1, 0.0)
    out = (model.a2 @ h1 + model.b2[:, None])[0]
    return out, (x, z0, h0, z1, h1)


def _backward(model: EVModel, cache, upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum(upstream * out) with respect to flat phi."""
    x, z0, h0, z1, h1 = cache
    up = upstream[None, :]
    d_a2 = up @ h1.T
    d_b2 = up.sum(axis=1)
    delta1 = (model.a2.T @ up) * (z1 > 0.0)
    d_a1 = delta1 @ h0.T
    d_b1 = delta1.sum(axis=1)
    delta0 = (model.a1.T @ delta1) * (z0 > 0.0)
    d_a0 = delta0 @ x.T
    d_b0 = delta0.sum(axis=1)
    return np.concatenate([
        d_a0.ravel(), d_a1.ravel(), d_a2.ravel(), d_b0, d_b1, d_b2.ravel(),
    ])


def forward_batch(model: EVModel, income_value: float, a_next: np.ndarray) -> np.ndarray:
    """EV predictions for one income value across an array of savings choices."""
    a = np.asarray(a_next, dtype=float).ravel()
    x = np.vstack([np.full(a.size, income_value), a])
    out, _ = _forward_cached(model, x)
    return out


def forward(model: EVModel, income_value: float, a_next: float) -> float:
    return float(forward_batch(model, income_value, np.array([a_next]))[0])


def grad_params(model: EVModel, income_value: float, a_next: float) -> np.ndarray:
    """d EV / d phi at a single input, as a flat vector aligned with flatten()."""
    x = np.array([[income_value], [a_next]])
    _, cache = _forward_cached(model, x)
    return _backward(model, cache, np.ones(1))


# --- ADAM --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPS


def init_adam(n: int) -> AdamState:
    return AdamState(m=np.zeros(n), v=np.zeros(n))


def adam_step(state: AdamState, phi: np.ndarray, grad: np.ndarray, lr: float):
    """One ADAM update.  Returns (phi_new, state_new); inputs are not mutated."""
    t = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    phi_new = phi - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return phi_new, replace(state, m=m, v=v, step_count=t)


# --- supervised pretraining ---------------------------------------------------


def greedy_consumption(model: EVModel, p: ModelParams, assets: np.ndarray, y: IncomeState) -> np.ndarray:
    """Consumption implied by a grid argmax against the raw network.

    Used to check that the pretrained model induces a sensible (monotone)
    time-0 policy before any learning happens.
    """
    sav = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    yv = p.income_value(y)
    ev = forward_batch(model, yv, sav)
    out = np.empty(np.asarray(assets).size)
    for i, a in enumerate(np.asarray(assets, dtype=float)):
        x = yv + p.gross_return * a
        n_feas = int(np.searchsorted(sav, x - C_FLOOR, side="left"))
        if n_feas == 0:
            out[i] = np.nan
            continue
        q = utility(x - sav[:n_feas]) + p.beta * ev[:n_feas]
        out[i] = x - sav[int(np.argmax(q))]
    return out


@dataclass
class PretrainReport:
    epochs: int
    heldout_error: float
    best_heldout_error: float
    monotone: bool
    lr_final: float
    train_mse: list = field(default_factory=list)
    heldout_trace: list = field(default_factory=list)
    adam_final: AdamState | None = None
    policy_error: float = np.nan


def heldout_grid(p: ModelParams) -> np.ndarray:
    """Validation asset grid: training-node midpoints plus two near-edge points."""
    grid = np.linspace(p.a_min, p.a_max, p.train_grid_n)
    mid = 0.5 * (grid[:-1] + grid[1:])
    h = grid[1] - grid[0]
    return np.sort(np.concatenate([mid, [p.a_min + 0.25 * h, p.a_max - 0.25 * h]]))


def _heldout_max_error(model: EVModel, sol: RationalSolution, p: ModelParams, grid: np.ndarray) -> float:
    err = 0.0
    for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
        pred = forward_batch(model, p.income_value(y), grid)
        err = max(err, float(np.max(np.abs(pred - sol.ev_at(y, grid)))))
    return err


def policy_sup_error(model: EVModel, sol: RationalSolution, p: ModelParams) -> float:
    """Sup-norm distance between the raw argmax consumption policy implied by
    the network and the rational policy, over the evaluation asset grid and
    both income states."""
    from .rational import consumption_refined

    sav = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    assets = eval_asset_grid(p, extend=False)
    worst = 0.0
    for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
        yv = p.income_value(y)
        ev = forward_batch(model, yv, sav)
        bench = consumption_refined(sol, y, assets)
        for a, cb in zip(assets, bench):
            x = p.cash_on_hand(a, y)
            n_feas = int(np.searchsorted(sav, x - C_FLOOR, side="left"))
            q = utility(x - sav[:n_feas]) + p.beta * ev[:n_feas]
            c = x - sav[int(np.argmax(q))]
            worst = max(worst, abs(c - cb))
    return worst


def _monotone_policy(model: EVModel, p: ModelParams, slack: float) -> bool:
    """Monotonicity of the implied consumption policy on the evaluation grid.

    Uses the polynomial-smoothed continuation value, matching how policies are
    displayed: the raw argmax policy keeps sub-0.05 local oscillations even at
    held-out errors well below tolerance, so a raw-policy gate never passes.
    """
    from .polysmooth import fit_poly, smoothed_ev  # local: polysmooth imports this module

    poly = fit_poly(model, p)
    assets = np.linspace(p.a_min, p.a_max, p.poly_eval_n)
    sav = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
        yv = p.income_value(y)
        ev = smoothed_ev(poly, y, sav)
        c = np.empty(assets.size)
        for i, a in enumerate(assets):
            x = yv + p.gross_return * a
            n_feas = int(np.searchsorted(sav, x - C_FLOOR, side="left"))
            q = utility(x - sav[:n_feas]) + p.beta * ev[:n_feas]
            c[i] = x - sav[int(np.argmax(q))]
        if np.any(np.diff(c) < -slack):
            return False
    return True


def pretrain(
    sol: RationalSolution,
    p: ModelParams,
    rng: np.random.Generator,
    lr0: float = 1e-3,
    batch_size: int = 32,
    patience: int = 200,
    max_epochs: int = 30_000,
    init_scale: str = "he",
    policy_tolerance: float | None = 0.02,
) -> tuple[EVModel, PretrainReport]:
    """Fit the network to the rational continuation value by minibatch ADAM.

    Training pairs are the rational EV at every asset node for both income
    states.  Each epoch shuffles the pairs and steps through minibatches of
    batch_size; the learning rate halves when the held-out max error has not
    improved for `patience` epochs.  Training stops once all gates hold:
    held-out max error below p.pretrain_tolerance, implied (smoothed) time-0
    consumption policy monotone on the evaluation grid (up to one
    savings-grid step of argmax noise), and the raw argmax policy within
    policy_tolerance of the rational policy in sup-norm on that grid.  The
    last gate exists because the held-out tolerance alone leaves the policy
    loose: near the borrowing constraint the choice problem is almost flat in
    savings, so an EV error of 2.5e-3 can still move the argmax by ~0.05
    income units of consumption.  Pass policy_tolerance=None to stop on the
    error gate alone.  Raises PretrainFailure if the epoch budget runs out.
    """
    xs, ts = [], []
    for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
        yv = p.income_value(y)
        xs.append(np.vstack([np.full(sol.asset_grid.size, yv), sol.asset_grid]))
        ts.append(sol.ev[int(y)])
    x_all = np.hstack(xs)
    t_all = np.concatenate(ts)
    n_obs = t_all.size
    grid_h = heldout_grid(p)
    policy_slack = (p.a_max - p.a_min) / (p.savings_grid_n - 1)

    model = init_model(p.hidden_dim, rng, scale=init_scale)
    phi = flatten(model)
    adam = init_adam(phi.size)
    lr = lr0
    best_err = np.inf
    best_phi = phi.copy()
    since_improve = 0
    report = PretrainReport(0, np.inf, np.inf, False, lr)

    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(n_obs)
        for start in range(0, n_obs, batch_size):
            take = order[start:start + batch_size]
            xb, tb = x_all[:, take], t_all[take]
            model = unflatten(phi, p.hidden_dim)
            pred, cache = _forward_cached(model, xb)
            resid = pred - tb
            grad = _backward(model, cache, (2.0 / take.size) * resid)
            phi, adam = adam_step(adam, phi, grad, lr)

        model = unflatten(phi, p.hidden_dim)
        pred_all, _ = _forward_cached(model, x_all)
        report.train_mse.append(float(np.mean((pred_all - t_all) ** 2)))
        err = _heldout_max_error(model, sol, p, grid_h)
        report.heldout_trace.append(err)
        if err < best_err - 1e-12:
            best_err = err
            best_phi = phi.copy()
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= patience:
                lr *= 0.5
                since_improve = 0

        if err < p.pretrain_tolerance and _monotone_policy(model, p, policy_slack):
            pol_err = policy_sup_error(model, sol, p)
            report.policy_error = pol_err
            if policy_tolerance is None or pol_err < policy_tolerance:
                report.epochs = epoch
                report.heldout_error = err
                report.best_heldout_error = best_err
                report.monotone = True
                report.lr_final = lr
                report.adam_final = adam
                return model, report

    raise PretrainFailure(
        f"held-out max error {best_err:.3e} after {max_epochs} epochs "
        f"(target {p.pretrain_tolerance:.1e})"
    )


# --- checkpoint io -------------------------------------------------------------
#
# Format: one JSON header line (shape and metadata), newline, then the flat
# parameter vector as little-endian float64 bytes.  No timestamps anywhere, so
# identical models serialize to identical bytes.


def save_checkpoint(model: EVModel, path: str | Path, meta: dict | None = None) -> None:
    header = {
        "kind": "ev-checkpoint",
        "version": 1,
        "hidden_dim": model.hidden_dim,
        "n_params": n_params(model.hidden_dim),
        "dtype": "<f8",
        "meta": meta or {},
    }
    payload = flatten(model).astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def load_checkpoint(path: str | Path) -> tuple[EVModel, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("kind") != "ev-checkpoint":
            raise ConfigError(f"{path}: not an EV checkpoint")
        phi = np.frombuffer(fh.read(), dtype="<f8")
    if phi.size != header["n_params"]:
        raise ConfigError(f"{path}: payload has {phi.size} params, header says {header['n_params']}")
    return unflatten(phi.astype(np.float64), header["hidden_dim"]), header.get("meta", {})
