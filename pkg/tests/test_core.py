"""Parameter, transition-matrix, and grid plumbing."""

import numpy as np
import pytest

from qsave.core import (
    C_FLOOR,
    IncomeState,
    IncomeTransition,
    ModelParams,
    SavingsGrid,
    eval_asset_grid,
    load_params,
    params_from_mapping,
    params_to_mapping,
    parse_kv_text,
    pessimism_transform,
    transition_sample,
    utility,
    validate_params,
)
from qsave.errors import BetaRViolation, ConfigError, GridError, ProbabilityError


def test_utility_is_log():
    assert utility(1.0) == 0.0
    c = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(utility(c), np.log(c), rtol=0, atol=0)


def test_default_calibration_pins():
    p = ModelParams()
    assert p.beta == 0.9703
    assert p.gross_return == 1.00985
    assert p.income_employed == 1.0
    assert p.income_unemployed == 0.472
    assert (p.a_min, p.a_max) == (0.0, 4.5)
    assert p.savings_grid_n == 8750
    assert p.train_grid_n == 500
    assert p.transfer == 0.784
    assert (p.n_agents, p.n_periods) == (50, 50)
    assert p.learning_rate == 1.1e-3
    assert p.hidden_dim == 80
    assert p.pretrain_tolerance == 2.5e-3
    assert (p.poly_degree, p.poly_eval_n) == (5, 50)


def test_income_helpers():
    p = ModelParams()
    assert p.income_value(IncomeState.EMPLOYED) == 1.0
    assert p.income_value(IncomeState.UNEMPLOYED) == 0.472
    assert p.cash_on_hand(2.0, IncomeState.EMPLOYED) == 1.0 + 1.00985 * 2.0


def test_renormalization_frozen_digits():
    # the employed row sums to 0.939 + 0.0607 = 0.9996999999999999 in doubles;
    # dividing each entry by that sum gives exactly these floats
    t = IncomeTransition().normalized()
    assert t.p_ee == pytest.approx(0.9392817845353606, abs=0)
    assert t.p_eu == pytest.approx(0.060718215464639395, abs=0)
    np.testing.assert_allclose(t.row_sums(), 1.0, rtol=0, atol=1e-15)
    # unemployed row already sums to 1 and must be untouched
    assert t.p_ue == pytest.approx(0.392, abs=1e-15)


def test_stationary_distribution():
    t = IncomeTransition().normalized()
    pi = t.stationary()
    np.testing.assert_allclose(pi @ t.matrix(), pi, atol=1e-15)
    assert pi[0] == pytest.approx(0.866, abs=5e-3)


def test_validate_params_returns_normalized_copy():
    p = validate_params(ModelParams())
    np.testing.assert_allclose(p.transition.row_sums(), 1.0, atol=1e-15)


@pytest.mark.parametrize(
    "kwargs, exc",
    [
        (dict(beta=1.0), BetaRViolation),
        (dict(beta=0.999), BetaRViolation),  # beta * R >= 1
        (dict(a_min=1.0, a_max=0.5), GridError),
        (dict(a_min=-0.1), GridError),
        (dict(savings_grid_n=1), GridError),
        (dict(income_unemployed=0.0), ConfigError),
        (dict(income_unemployed=1.5), ConfigError),
        (dict(transfer=0.0), ConfigError),
        (dict(learning_rate=0.0), ConfigError),
        (dict(lr_decay_exponent=0.0), ConfigError),
        (dict(hidden_layers=3), ConfigError),
    ],
)
def test_validate_params_rejects(kwargs, exc):
    from dataclasses import replace

    with pytest.raises(exc):
        validate_params(replace(ModelParams(), **kwargs))


def test_validate_params_rejects_bad_probability():
    t = IncomeTransition(p_ee=1.2, p_eu=-0.2)
    from dataclasses import replace

    with pytest.raises(ProbabilityError):
        validate_params(replace(ModelParams(), transition=t))


def test_pessimism_transform():
    t = IncomeTransition().normalized()
    t15 = pessimism_transform(t, 1.5)
    np.testing.assert_allclose(t15.row_sums(), 1.0, atol=1e-15)
    # both into-unemployment probabilities scale up before renormalization,
    # so the conditional odds of unemployment rise from both states
    assert t15.p_eu / t15.p_ee > t.p_eu / t.p_ee
    assert t15.p_uu / t15.p_ue > t.p_uu / t.p_ue
    odds = (t15.p_eu / t15.p_ee) / (t.p_eu / t.p_ee)
    assert odds == pytest.approx(1.5, rel=1e-12)


def test_pessimism_factor_one_is_identity():
    t = IncomeTransition().normalized()
    t1 = pessimism_transform(t, 1.0)
    np.testing.assert_allclose(t1.matrix(), t.matrix(), atol=1e-15)


def test_transition_sample_deterministic_and_distributed():
    t = IncomeTransition().normalized()
    rng = np.random.default_rng(7)
    draws = [transition_sample(t, IncomeState.EMPLOYED, rng) for _ in range(20_000)]
    frac_u = np.mean([d == IncomeState.UNEMPLOYED for d in draws])
    assert frac_u == pytest.approx(t.p_eu, abs=5e-3)
    # same seed, same path
    r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
    path1 = [transition_sample(t, IncomeState.UNEMPLOYED, r1) for _ in range(50)]
    path2 = [transition_sample(t, IncomeState.UNEMPLOYED, r2) for _ in range(50)]
    assert path1 == path2


def test_savings_grid():
    p = ModelParams()
    g = SavingsGrid.uniform(p)
    assert len(g) == 8750
    assert g.points[0] == 0.0 and g.points[-1] == 4.5
    steps = np.diff(g.points)
    np.testing.assert_allclose(steps, steps[0], rtol=1e-9)
    with pytest.raises(GridError):
        SavingsGrid(points=np.array([0.0, 0.0, 1.0]))


def test_eval_asset_grid():
    p = ModelParams()
    g = eval_asset_grid(p, extend=False)
    assert g.size == 50
    assert g[0] == p.a_min and g[-1] == p.a_max
    assert np.all(np.diff(g) > 0)
    ge = eval_asset_grid(p)
    assert ge.size == 50 and ge[-1] > p.a_max  # headroom for +transfer shifts


def test_config_roundtrip(tmp_path):
    p = ModelParams()
    text = "\n".join(f"{k} = {v}" for k, v in params_to_mapping(p).items())
    path = tmp_path / "params.cfg"
    path.write_text(text + "\n# trailing comment\n")
    q = load_params(path)
    assert q == validate_params(p)  # loading validates, so rows come back normalized


def test_parse_kv_text_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_kv_text("this line has no equals sign")
    with pytest.raises(ConfigError):
        params_from_mapping({"beta": "not-a-number"})
    # unknown keys are ignored here; the CLI layer owns non-param keys
    assert params_from_mapping({"unrelated_key": "1.0"}) == ModelParams()


def test_parse_kv_text_comments_and_blanks():
    kv = parse_kv_text("# comment\n\nbeta = 0.9\n  a_max=4.0  \n")
    assert kv == {"beta": "0.9", "a_max": "4.0"}


def test_c_floor_is_tiny():
    assert 0.0 < C_FLOOR < 1e-9
