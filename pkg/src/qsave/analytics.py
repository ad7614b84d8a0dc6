"""Statistics for the simulated panels: experience index, OLS, Welch tests.

The t and F distributions are computed from the regularized incomplete beta
function (Lentz continued fraction, log-gamma front factor) so results do not
depend on an external stats library; the test suite cross-checks against
scipy to 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .core import IncomeState, ModelParams
from .errors import DegenerateSample, InsufficientHistory, RankDeficient

# --- experience index -----------------------------------------------------------


def experience_weights(t: int) -> np.ndarray:
    """Linearly decaying weights w(t, k) = (t - k) / sum over k = 2 .. t - 1.

    The two most recent periods (k = 0, 1) are excluded; defined for t >= 4,
    where at least two lags exist.  Weights sum to one exactly.
    """
    if t < 4:
        raise InsufficientHistory(f"experience weights need t >= 4, got {t}")
    k = np.arange(2, t, dtype=float)
    w = t - k
    return w / w.sum()


def experience_index(history, t: int) -> float:
    """Weighted unemployment experience sum_k w(t, k) * W_{t-k}.

    history holds unemployment indicators (truthy = unemployed) for periods
    1 .. len(history); entry j is period j + 1.  Periods t - 1 and t are not
    used, so history must cover at least period t - 2.
    """
    w = experience_weights(t)
    idx = t - np.arange(2, t) - 1  # 0-based positions of W_{t-k}
    flags = np.asarray([1.0 if h else 0.0 for h in history])
    if idx.max() >= flags.size:
        raise InsufficientHistory(
            f"history has {flags.size} periods, index at t={t} reads period {idx.max() + 1}"
        )
    return float(w @ flags[idx])


# --- t / F distribution helpers ----------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter, eps, fpmin = 300, 3e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h  # converged to machine noise in practice well before max_iter


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t_stat: float, df: float) -> float:
    if df <= 0.0 or not math.isfinite(t_stat):
        return float("nan")
    return betainc_reg(df / 2.0, 0.5, df / (df + t_stat * t_stat))


def t_quantile(prob: float, df: float) -> float:
    """Inverse CDF for prob in (0.5, 1): bisection on the monotone tail."""
    if not 0.5 < prob < 1.0:
        raise ValueError(f"t_quantile expects prob in (0.5, 1), got {prob}")
    target = 2.0 * (1.0 - prob)  # two-sided p at the desired quantile
    lo, hi = 0.0, 1.0
    while t_two_sided_p(hi, df) > target:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_two_sided_p(mid, df) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_upper_p(f_stat: float, df1: float, df2: float) -> float:
    if not math.isfinite(f_stat) or f_stat < 0.0:
        return float("nan")
    return betainc_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f_stat))


def stars(p_value: float) -> str:
    if not math.isfinite(p_value):
        return ""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.10:
        return "*"
    return ""


# --- OLS ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OlsResult:
    """Homoskedastic OLS summary; CIs are 95% t intervals."""

    names: tuple
    coef: np.ndarray
    se: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    r2: float
    adj_r2: float
    f_stat: float
    f_df: tuple
    f_pvalue: float
    loglik: float
    aic: float
    bic: float
    n: int
    k: int
    sigma2: float

    def coef_by_name(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def p_by_name(self, name: str) -> float:
        return float(self.p_values[self.names.index(name)])


def ols(y, x, names: tuple | None = None) -> OlsResult:
    """Least squares of y on the columns of x (include the intercept yourself).

    Raises RankDeficient when the design is singular beyond numerical
    tolerance and DegenerateSample when there are no spare degrees of freedom.
    R-squared uses centered total variation; for constant y it is 0 by
    convention and the F statistic is undefined (NaN).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n, k = x.shape
    if names is None:
        names = tuple(f"x{i}" for i in range(k))
    if n <= k:
        raise DegenerateSample(f"n={n} observations for k={k} regressors")
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < k:
        raise RankDeficient(f"design matrix rank {rank} < {k} columns")
    resid = y - x @ coef
    rss = float(resid @ resid)
    dof = n - k
    sigma2 = rss / dof
    xtx_inv = np.linalg.inv(x.T @ x)
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0.0, coef / se, np.inf * np.sign(coef))
    p_values = np.array([t_two_sided_p(t, dof) for t in t_stats])
    t_crit = t_quantile(0.975, dof)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst > 0.0:
        r2 = 1.0 - rss / sst
    else:
        r2 = 0.0  # constant response: no variation to explain
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof
    if k > 1 and sst > 0.0 and r2 < 1.0:
        f_stat = (r2 / (k - 1)) / ((1.0 - r2) / dof)
        f_pvalue = f_upper_p(f_stat, k - 1, dof)
    else:
        f_stat, f_pvalue = float("nan"), float("nan")
    if rss > 0.0:
        loglik = -0.5 * n * (math.log(2.0 * math.pi) + math.log(rss / n) + 1.0)
    else:
        loglik = float("inf")  # exact fit
    aic = 2.0 * k - 2.0 * loglik
    bic = k * math.log(n) - 2.0 * loglik
    return OlsResult(
        names=tuple(names), coef=coef, se=se, t_stats=t_stats, p_values=p_values,
        ci_low=coef - t_crit * se, ci_high=coef + t_crit * se,
        r2=r2, adj_r2=adj_r2, f_stat=f_stat, f_df=(k - 1, dof), f_pvalue=f_pvalue,
        loglik=loglik, aic=aic, bic=bic, n=n, k=k, sigma2=sigma2,
    )


# --- Welch two-sample test -----------------------------------------------------------


@dataclass(frozen=True)
class WelchResult:
    mean_a: float
    mean_b: float
    difference: float
    t_stat: float
    df: float
    p_value: float
    stars: str
    n_a: int
    n_b: int


def welch_t(a, b) -> WelchResult:
    """Unequal-variance two-sample t test, Welch-Satterthwaite degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise DegenerateSample(f"welch_t needs >= 2 per group, got {a.size} and {b.size}")
    va, vb = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    if va == 0.0 and vb == 0.0:
        raise DegenerateSample("both samples are constant; t statistic undefined")
    sa2, sb2 = va / a.size, vb / b.size
    t_stat = (float(a.mean()) - float(b.mean())) / math.sqrt(sa2 + sb2)
    df = (sa2 + sb2) ** 2 / (sa2**2 / (a.size - 1) + sb2**2 / (b.size - 1))
    p = t_two_sided_p(t_stat, df)
    return WelchResult(
        mean_a=float(a.mean()), mean_b=float(b.mean()),
        difference=float(a.mean() - b.mean()),
        t_stat=t_stat, df=df, p_value=p, stars=stars(p),
        n_a=int(a.size), n_b=int(b.size),
    )


# --- panel regressions ----------------------------------------------------------------


def scarring_regression(panel: pd.DataFrame, p: ModelParams) -> dict[str, OlsResult]:
    """Consumption on unemployment experience, with and without an asset control.

    Uses panel rows where the experience index is defined (period clock >= 4).
    The income regressor is the income value, not the state code.  Raises
    RankDeficient when experience never varies (for example, zero job
    separation risk).
    """
    rows = panel.dropna(subset=["experience_index"])
    if rows.empty:
        raise DegenerateSample("panel has no rows with a defined experience index")
    y = rows["consumption"].to_numpy(dtype=float)
    uep = rows["experience_index"].to_numpy(dtype=float)
    assets = rows["assets"].to_numpy(dtype=float)
    income = np.where(
        rows["income_state"].to_numpy() == int(IncomeState.EMPLOYED),
        p.income_employed, p.income_unemployed,
    )
    ones = np.ones_like(y)
    without = ols(y, np.column_stack([ones, uep, income]),
                  names=("intercept", "experience", "income"))
    with_assets = ols(y, np.column_stack([ones, uep, assets, income]),
                      names=("intercept", "experience", "assets", "income"))
    return {"without_assets": without, "with_assets": with_assets}


def pooled_mpc(measurements: pd.DataFrame) -> dict:
    """Pooled liquidity comparison over concatenated measurement tables.

    Expects columns mpc and liquidity_class; rows keep their within-seed
    classification, so pooling across seeds is a plain concatenation.
    """
    low = measurements.loc[measurements["liquidity_class"] == "low", "mpc"].to_numpy()
    high = measurements.loc[measurements["liquidity_class"] == "high", "mpc"].to_numpy()
    test = welch_t(low, high)
    return {
        "n_low": int(low.size), "n_high": int(high.size),
        "mpc_low": test.mean_a, "mpc_high": test.mean_b,
        "difference": test.difference, "t_stat": test.t_stat,
        "df": test.df, "p_value": test.p_value, "stars": test.stars,
    }


def mpc_table(results: list) -> pd.DataFrame:
    """Table of group means and tests, one row per classification period.

    Accepts mpc_experiment results (or their stats dicts).  Empty-group notes
    are carried into the row so degenerate windows stay visible in the output.
    """
    cols = ["classify_at", "n_low", "n_high", "mpc_low", "mpc_high",
            "difference", "t_stat", "p_value", "stars", "note"]
    stats_list = [r.stats if hasattr(r, "stats") else r for r in results]
    frame = pd.DataFrame([{c: s.get(c) for c in cols} for s in stats_list])
    return frame.sort_values("classify_at").reset_index(drop=True)
