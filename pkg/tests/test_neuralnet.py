"""Network forward/backward, ADAM, pretraining gates, and checkpoint io."""

from dataclasses import replace

import numpy as np
import pytest

from qsave.core import IncomeState, ModelParams, validate_params
from qsave.errors import ConfigError
from qsave.neuralnet import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    AdamState,
    adam_step,
    flatten,
    forward,
    forward_batch,
    grad_params,
    greedy_consumption,
    heldout_grid,
    init_adam,
    init_model,
    load_checkpoint,
    n_params,
    pretrain,
    save_checkpoint,
    unflatten,
)


def test_n_params_formula():
    # input (2) -> h -> h -> 1, all layers with bias
    for h in (1, 12, 80):
        assert n_params(h) == (2 * h + h) + (h * h + h) + (h + 1)


def test_flatten_unflatten_roundtrip():
    rng = np.random.default_rng(0)
    m = init_model(12, rng)
    phi = flatten(m)
    assert phi.size == n_params(12)
    m2 = unflatten(phi, 12)
    np.testing.assert_array_equal(flatten(m2), phi)
    for a, b in zip(
        (m.w1, m.b1, m.w2, m.b2, m.w3, m.b3),
        (m2.w1, m2.b1, m2.w2, m2.b2, m2.w3, m2.b3),
    ):
        np.testing.assert_array_equal(a, b)


def test_unflatten_rejects_wrong_size():
    with pytest.raises(ValueError):
        unflatten(np.zeros(10), 12)


def test_init_model_seeded_and_scaled():
    a = init_model(40, np.random.default_rng(5))
    b = init_model(40, np.random.default_rng(5))
    np.testing.assert_array_equal(flatten(a), flatten(b))
    # He initialization: hidden-layer weights drawn with std sqrt(2 / fan_in)
    big = init_model(400, np.random.default_rng(1))
    assert np.std(big.w2) == pytest.approx(np.sqrt(2.0 / 400), rel=0.05)
    lit = init_model(400, np.random.default_rng(1), scale="sqrt2")
    assert np.std(lit.w2) == pytest.approx(np.sqrt(2.0), rel=0.05)
    with pytest.raises(ConfigError):
        init_model(8, np.random.default_rng(0), scale="unknown")


def test_forward_batch_matches_scalar():
    m = init_model(16, np.random.default_rng(2))
    a = np.linspace(0.0, 4.5, 7)
    batch = forward_batch(m, 0.472, a)
    scal = np.array([forward(m, 0.472, ai) for ai in a])
    np.testing.assert_allclose(batch, scal, atol=1e-14)


def test_gradient_matches_central_differences():
    """Acceptance property: max relative error < 1e-5 against central FD."""
    rng = np.random.default_rng(3)
    m = init_model(10, rng)
    worst = 0.0
    for income, a in [(1.0, 0.3), (0.472, 2.2), (1.0, 4.4), (0.472, 0.0)]:
        g = grad_params(m, income, a)
        phi = flatten(m)
        h = 1e-6
        fd = np.empty_like(phi)
        for i in range(phi.size):
            up, dn = phi.copy(), phi.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (forward(unflatten(up, 10), income, a)
                     - forward(unflatten(dn, 10), income, a)) / (2 * h)
        denom = np.maximum(np.abs(fd), 1e-8)
        worst = max(worst, float(np.max(np.abs(g - fd) / denom)))
    assert worst < 1e-5


def test_adam_two_step_oracle():
    """Hand-computed bias-corrected ADAM against the implementation."""
    phi0 = np.array([1.0, -2.0, 0.5])
    g1 = np.array([0.3, -0.1, 2.0])
    g2 = np.array([-0.4, 0.2, 1.0])
    lr = 0.01

    st = init_adam(3)
    assert st.step == 0
    phi1, st = adam_step(st, phi0, g1, lr)
    phi2, st = adam_step(st, phi1, g2, lr)
    assert st.step == 2

    b1, b2, eps = ADAM_BETA1, ADAM_BETA2, ADAM_EPS
    m = (1 - b1) * g1
    v = (1 - b2) * g1 ** 2
    ref1 = phi0 - lr * (m / (1 - b1)) / (np.sqrt(v / (1 - b2)) + eps)
    np.testing.assert_allclose(phi1, ref1, atol=1e-15)
    m = b1 * m + (1 - b1) * g2
    v = b2 * v + (1 - b2) * g2 ** 2
    ref2 = ref1 - lr * (m / (1 - b1 ** 2)) / (np.sqrt(v / (1 - b2 ** 2)) + eps)
    np.testing.assert_allclose(phi2, ref2, atol=1e-15)


def test_adam_state_is_immutable():
    st = init_adam(2)
    phi, st2 = adam_step(st, np.zeros(2), np.ones(2), 0.1)
    assert st.step == 0 and st2.step == 1
    np.testing.assert_array_equal(st.m, np.zeros(2))


def test_heldout_grid_shape(tiny_params):
    g = heldout_grid(ModelParams())
    assert g.size == 501
    assert np.all(np.diff(g) > 0)
    assert g[0] >= 0.0 and g[-1] <= 4.5
    # none of the held-out points may coincide with a training node
    train = np.linspace(0.0, 4.5, 500)
    assert np.min(np.abs(g[:, None] - train[None, :])) > 1e-6


def test_greedy_consumption_brute_force(tiny_params):
    p = tiny_params
    m = init_model(p.hidden_dim, np.random.default_rng(4))
    assets = np.array([0.0, 0.7, 2.1, 4.3])
    got = greedy_consumption(m, p, assets, IncomeState.UNEMPLOYED)
    grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    from qsave.core import C_FLOOR, utility

    for a, c in zip(assets, got):
        x = p.cash_on_hand(a, IncomeState.UNEMPLOYED)
        feas = grid[grid < x - C_FLOOR]
        q = utility(x - feas) + p.beta * forward_batch(m, 0.472, feas)
        assert c == pytest.approx(x - feas[int(np.argmax(q))], abs=0)


def test_checkpoint_roundtrip_and_determinism(tmp_path):
    m = init_model(12, np.random.default_rng(6))
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(m, p1, meta={"seed": 6})
    save_checkpoint(m, p2, meta={"seed": 6})
    assert p1.read_bytes() == p2.read_bytes()  # no timestamps anywhere
    back, meta = load_checkpoint(p1)
    np.testing.assert_array_equal(flatten(back), flatten(m))
    assert meta == {"seed": 6}


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b'{"kind": "something-else"}\n')
    with pytest.raises(ConfigError):
        load_checkpoint(path)


def test_pretrain_tiny_problem():
    """End-to-end pretraining on a small model with loose gates."""
    from qsave.rational import solve_value_iteration

    p = validate_params(replace(
        ModelParams(), train_grid_n=50, savings_grid_n=500, hidden_dim=16,
        pretrain_tolerance=2e-2, poly_eval_n=25,
    ))
    sol = solve_value_iteration(p)
    model, report = pretrain(sol, p, np.random.default_rng(1),
                             policy_tolerance=None, max_epochs=20_000)
    assert report.heldout_error < 2e-2
    assert report.monotone
    assert report.epochs == len(report.heldout_trace)
    # the fit must track the rational continuation value on the nodes
    got = forward_batch(model, p.income_value(IncomeState.EMPLOYED), sol.asset_grid)
    assert np.max(np.abs(got - sol.ev[0])) < 4e-2
