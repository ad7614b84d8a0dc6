"""Command-line entry points: pretrain, run, report.

    qsave pretrain --config base.cfg --seed 0 --out runs/base
    qsave run --config base.cfg --seeds 0..9 --experiment mpc --out runs/base
    qsave report --out runs/base

Every output table starts with a `# qsave {json}` header carrying the full
configuration, seeds, and a config hash, so any artifact is traceable to the
run that produced it.  Figures carry the same header as an XML comment.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .agent import mpc as agent_mpc
from .agent import choose_savings
from .analytics import mpc_table, pooled_mpc, scarring_regression
from .core import (
    IncomeState,
    ModelParams,
    eval_asset_grid,
    params_from_mapping,
    params_to_mapping,
    parse_kv_text,
    validate_params,
)
from .errors import ConfigError, MissingArtifact, QsaveError
from .figures import two_panel_figure
from .neuralnet import EVModel, load_checkpoint, pretrain, save_checkpoint
from .rational import (
    RationalSolution,
    consumption_refined,
    load_solution,
    mpc_refined,
    save_solution,
    solve_value_iteration,
)
from .simulate import (
    PopulationRun,
    ScfDistribution,
    extreme_shock_experiment,
    long_run_run,
    mpc_experiment,
    pessimism_experiment,
    run_population,
)

logger = logging.getLogger(__name__)

_SCF_KEYS = {"scf_q12_5", "scf_q37_5", "scf_q62_5", "scf_q87_5", "scf_q95"}
_MISC_KEYS = {"init_scale", "pessimism_factor", "optimizer"}
EXPERIMENTS = ("mpc", "scarring", "extreme", "pessimism", "longrun")

# Reference outputs of the baseline calibration, used by `report` to annotate
# whether a run landed inside the expected bands.
REFERENCE = {
    "mpc_low": (0.40, 0.60),
    "mpc_high": (0.25, 0.45),
    "mpc_difference_min": 0.05,
    "scarring_experience_with_assets": (-0.08, -0.01),
    "scarring_experience_without_assets": (-0.15, -0.04),
}


@dataclass
class RunConfig:
    params: ModelParams
    scf: ScfDistribution
    seeds: list[int] = field(default_factory=lambda: [0])
    experiment: str | None = None
    classify_at: int = 0
    use_smoothed: bool = False
    literal_update_sign: bool = True
    optimizer: str = "sgd"
    all_employed: bool = False
    pessimism_factor: float = 1.5
    init_scale: str = "he"
    out_dir: Path = Path("qsave_out")
    checkpoint: Path | None = None

    def config_hash(self) -> str:
        blob = json.dumps(self._snapshot_config(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def _snapshot_config(self) -> dict:
        return {
            "params": params_to_mapping(self.params),
            "scf": {k: getattr(self.scf, k) for k in
                    ("q12_5", "q37_5", "q62_5", "q87_5", "q95")},
            "init_scale": self.init_scale,
        }

    def meta(self) -> dict:
        return {
            "artifact": "qsave", "version": __version__,
            "config_hash": self.config_hash(),
            "seeds": self.seeds, "experiment": self.experiment,
            "classify_at": self.classify_at, "use_smoothed": self.use_smoothed,
            "literal_update_sign": self.literal_update_sign,
            "optimizer": self.optimizer,
            "all_employed": self.all_employed,
            "pessimism_factor": self.pessimism_factor,
            **self._snapshot_config(),
        }


def load_run_config(path: str | Path | None) -> RunConfig:
    """Build a RunConfig from a flat key-value file; an empty or missing
    config reproduces the baseline calibration."""
    kv = parse_kv_text(Path(path).read_text(encoding="utf-8")) if path else {}
    from .core import PARAM_KEYS
    unknown = set(kv) - PARAM_KEYS - _SCF_KEYS - _MISC_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    params = validate_params(params_from_mapping(kv))
    scf_kwargs = {}
    for key in _SCF_KEYS:
        if key in kv:
            try:
                scf_kwargs[key.removeprefix("scf_")] = float(kv[key])
            except ValueError as exc:
                raise ConfigError(f"config key {key}={kv[key]!r}: {exc}") from None
    cfg = RunConfig(params=params, scf=ScfDistribution(**scf_kwargs),
                    seeds=[params.seed])
    if "init_scale" in kv:
        if kv["init_scale"] not in ("he", "sqrt2"):
            raise ConfigError(f"init_scale must be 'he' or 'sqrt2', got {kv['init_scale']!r}")
        cfg.init_scale = kv["init_scale"]
    if "pessimism_factor" in kv:
        cfg.pessimism_factor = float(kv["pessimism_factor"])
    if "optimizer" in kv:
        if kv["optimizer"] not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {kv['optimizer']!r}")
        cfg.optimizer = kv["optimizer"]
    return cfg


# --- table io ------------------------------------------------------------------


def write_table(frame: pd.DataFrame, path: Path, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# qsave " + json.dumps(meta, sort_keys=True) + "\n")
        frame.to_csv(fh, index=False)


def read_table(path: Path) -> tuple[pd.DataFrame, dict]:
    if not Path(path).exists():
        raise MissingArtifact(f"expected artifact {path} does not exist")
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        meta = json.loads(first[len("# qsave "):]) if first.startswith("# qsave ") else {}
        frame = pd.read_csv(fh)
    return frame, meta


# --- shared pipeline pieces -------------------------------------------------------


def _ensure_rational(cfg: RunConfig) -> RationalSolution:
    path = cfg.out_dir / "rational.csv"
    if path.exists():
        sol = load_solution(path)
        if params_to_mapping(sol.params) == params_to_mapping(cfg.params):
            return sol
        logger.info("rational.csv was built from other parameters; re-solving")
    sol = solve_value_iteration(cfg.params)
    save_solution(sol, path)
    return sol


def _ensure_pretrained(cfg: RunConfig, sol: RationalSolution) -> EVModel:
    path = cfg.checkpoint or (cfg.out_dir / "pretrained.ckpt")
    if Path(path).exists():
        model, meta = load_checkpoint(path)
        if meta.get("config_hash") not in (None, cfg.config_hash()):
            raise ConfigError(
                f"{path} was pretrained under config {meta.get('config_hash')}, "
                f"current is {cfg.config_hash()}; delete it or pass --checkpoint"
            )
        return model
    logger.info("no checkpoint at %s; pretraining now", path)
    return _pretrain_and_save(cfg, sol, Path(path))


def _pretrain_and_save(cfg: RunConfig, sol: RationalSolution, path: Path) -> EVModel:
    rng = np.random.default_rng(cfg.seeds[0])
    model, report = pretrain(sol, cfg.params, rng, init_scale=cfg.init_scale)
    meta = {
        "seed": cfg.seeds[0], "config_hash": cfg.config_hash(),
        "epochs": report.epochs, "heldout_error": report.heldout_error,
        "init_scale": cfg.init_scale,
    }
    save_checkpoint(model, path, meta)
    report_path = path.parent / "pretrain_report.json"
    report_path.write_text(json.dumps({
        "epochs": report.epochs, "heldout_error": report.heldout_error,
        "best_heldout_error": report.best_heldout_error, "monotone": report.monotone,
        "lr_final": report.lr_final, "train_mse": report.train_mse,
        "heldout_trace": report.heldout_trace, **meta,
    }, sort_keys=True), encoding="utf-8")
    return model


def _population_runs(cfg: RunConfig, model: EVModel) -> list[PopulationRun]:
    runs = []
    for seed in cfg.seeds:
        logger.info("simulating seed %d", seed)
        run = run_population(
            cfg.params, cfg.scf, model, seed, classify_at=cfg.classify_at,
            literal_update_sign=cfg.literal_update_sign, all_employed=cfg.all_employed,
            optimizer=cfg.optimizer,
        )
        write_table(run.panel, cfg.out_dir / f"panel_seed{seed}.csv",
                    {**cfg.meta(), "seed": seed, "table": "panel"})
        history = run.panel[["agent_id", "t", "assets", "income_state",
                             "savings", "consumption", "td_error"]].copy()
        history["frozen"] = False
        write_table(history, cfg.out_dir / f"history_seed{seed}.csv",
                    {**cfg.meta(), "seed": seed, "table": "history"})
        runs.append(run)
    return runs


# --- commands ----------------------------------------------------------------------


def cmd_pretrain(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    sol = _ensure_rational(cfg)
    path = cfg.checkpoint or (cfg.out_dir / "pretrained.ckpt")
    _pretrain_and_save(cfg, sol, Path(path))
    print(f"pretrained checkpoint written to {path}")
    return 0


def _run_mpc(cfg: RunConfig, model: EVModel) -> None:
    stats_by_seed = []
    tables = []
    for seed in cfg.seeds:
        logger.info("mpc experiment seed %d classify_at %d", seed, cfg.classify_at)
        res = mpc_experiment(
            cfg.params, cfg.scf, model, classify_at=cfg.classify_at, seed=seed,
            literal_update_sign=cfg.literal_update_sign, all_employed=cfg.all_employed,
            optimizer=cfg.optimizer,
        )
        stats_by_seed.append({**res.stats, "seed": seed})
        tables.append(res.tables["measurements"])
    meas = pd.concat(tables, ignore_index=True)
    pooled = pooled_mpc(meas)
    write_table(meas, cfg.out_dir / "mpc_measurements.csv",
                {**cfg.meta(), "table": "mpc_measurements"})
    groups = pd.DataFrame([
        dict(classify_at=cfg.classify_at, group="low", n=pooled["n_low"],
             mpc=pooled["mpc_low"], t_stat=np.nan, p_value=np.nan, stars=""),
        dict(classify_at=cfg.classify_at, group="high", n=pooled["n_high"],
             mpc=pooled["mpc_high"], t_stat=np.nan, p_value=np.nan, stars=""),
        dict(classify_at=cfg.classify_at, group="difference",
             n=pooled["n_low"] + pooled["n_high"], mpc=pooled["difference"],
             t_stat=pooled["t_stat"], p_value=pooled["p_value"], stars=pooled["stars"]),
    ])
    write_table(groups, cfg.out_dir / "mpc_groups.csv", {**cfg.meta(), "table": "mpc_groups"})
    write_table(mpc_table(stats_by_seed), cfg.out_dir / "mpc_by_seed.csv",
                {**cfg.meta(), "table": "mpc_by_seed"})
    print(f"low-liquidity MPC {pooled['mpc_low']:.3f}, high {pooled['mpc_high']:.3f}, "
          f"difference {pooled['difference']:.3f} {pooled['stars']}")


def _run_scarring(cfg: RunConfig, runs: list[PopulationRun]) -> None:
    panel = pd.concat([r.panel for r in runs], ignore_index=True)
    fits = scarring_regression(panel, cfg.params)
    rows = []
    for model_name, res in fits.items():
        for i, term in enumerate(res.names):
            rows.append(dict(
                model=model_name, term=term, coef=res.coef[i], se=res.se[i],
                t_stat=res.t_stats[i], p_value=res.p_values[i],
                ci_low=res.ci_low[i], ci_high=res.ci_high[i],
                stars_=_stars(res.p_values[i]),
            ))
        rows.append(dict(model=model_name, term="_summary", coef=np.nan, se=np.nan,
                         t_stat=res.f_stat, p_value=res.f_pvalue, ci_low=np.nan,
                         ci_high=np.nan, stars_=""))
    frame = pd.DataFrame(rows)
    frame["n"] = fits["with_assets"].n
    frame["r2"] = np.where(frame["model"] == "with_assets",
                           fits["with_assets"].r2, fits["without_assets"].r2)
    write_table(frame, cfg.out_dir / "scarring_table.csv",
                {**cfg.meta(), "table": "scarring"})
    uep1 = fits["without_assets"].coef_by_name("experience")
    uep2 = fits["with_assets"].coef_by_name("experience")
    print(f"experience coefficient: {uep1:.4f} (no asset control), {uep2:.4f} (with assets)")


def _stars(p: float) -> str:
    from .analytics import stars
    return stars(p)


def _run_extreme(cfg: RunConfig, sol: RationalSolution, model: EVModel) -> None:
    res = extreme_shock_experiment(cfg.params, sol, model, cfg.scf,
                                   literal_update_sign=cfg.literal_update_sign,
                                   optimizer=cfg.optimizer)
    curves = res.tables["curves"]
    write_table(curves, cfg.out_dir / "extreme_curves.csv", {**cfg.meta(), "table": "extreme"})
    t_final = int(curves["t"].max())
    for t_label in (0, t_final):
        sub = curves[curves["t"] == t_label]
        for quantity in ("consumption", "mpc"):
            panels = []
            for y in (0, 1):
                labeled = []
                for agent_label in ("unemployment", "employment", "rational"):
                    rows = sub[(sub["agent"] == agent_label) & (sub["income_state"] == y)]
                    labeled.append((agent_label, rows[quantity].to_numpy()))
                panels.append(labeled)
            assets = np.sort(sub["assets"].unique())
            two_panel_figure(
                cfg.out_dir / f"extreme_{quantity}_t{t_label}.svg", assets,
                panels[0], panels[1], quantity,
                f"forced-spell twins, {quantity} at t={t_label}",
                {**cfg.meta(), "t": t_label, "quantity": quantity},
            )
    print(f"extreme-shock curves written (snapshots t=0 and t={t_final})")


def _run_pessimism(cfg: RunConfig, sol: RationalSolution) -> None:
    res = pessimism_experiment(cfg.params, cfg.pessimism_factor, sol)
    curves = res.tables["curves"]
    write_table(curves, cfg.out_dir / "pessimism_curves.csv",
                {**cfg.meta(), "table": "pessimism", "stats": res.stats})
    for quantity in ("consumption", "mpc"):
        panels = []
        for y in (0, 1):
            labeled = []
            for belief in ("baseline", "pessimistic"):
                rows = curves[(curves["belief"] == belief) & (curves["income_state"] == y)]
                labeled.append((belief, rows[quantity].to_numpy()))
            panels.append(labeled)
        assets = np.sort(curves["assets"].unique())
        two_panel_figure(
            cfg.out_dir / f"pessimism_{quantity}.svg", assets, panels[0], panels[1],
            quantity, f"rational policies, belief distortion x{cfg.pessimism_factor}",
            {**cfg.meta(), "quantity": quantity},
        )
    print(f"pessimism curves written (max consumption excess "
          f"{res.stats['max_consumption_excess']:.2e})")


def _run_longrun(cfg: RunConfig, sol: RationalSolution, model: EVModel) -> None:
    rows = []
    curve_tables = []
    for seed in cfg.seeds:
        res = long_run_run(cfg.params, sol, model, cfg.scf, seed,
                           literal_update_sign=cfg.literal_update_sign,
                           optimizer=cfg.optimizer)
        for t_label, dist in res.stats["distances"].items():
            rows.append(dict(seed=seed, t=t_label, distance=dist))
        curves = res.tables["curves"].copy()
        curves["seed"] = seed
        curve_tables.append(curves)
    dist_frame = pd.DataFrame(rows)
    write_table(dist_frame, cfg.out_dir / "longrun_distances.csv",
                {**cfg.meta(), "table": "longrun_distances"})
    write_table(pd.concat(curve_tables, ignore_index=True),
                cfg.out_dir / "longrun_curves.csv", {**cfg.meta(), "table": "longrun_curves"})
    med = dist_frame.groupby("t")["distance"].median()
    print("median policy distance by snapshot: "
          + ", ".join(f"t={int(t)}: {v:.4f}" for t, v in med.items()))


def _run_default(cfg: RunConfig, sol: RationalSolution, runs: list[PopulationRun]) -> None:
    """Cross-sectional policy and MPC figure at the final period of the first seed."""
    run = runs[0]
    p = cfg.params
    assets = eval_asset_grid(p, extend=False)
    grid = np.linspace(p.a_min, p.a_max, p.savings_grid_n)
    for quantity in ("consumption", "mpc"):
        panels = []
        for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
            acc = np.zeros(assets.size)
            for ag in run.agents:
                if quantity == "consumption":
                    acc += np.array([
                        p.cash_on_hand(a, y)
                        - choose_savings(ag, p, a, y, use_smoothed=cfg.use_smoothed, grid=grid)
                        for a in assets])
                else:
                    acc += np.array([
                        agent_mpc(ag, p, a, y, use_smoothed=cfg.use_smoothed, grid=grid)
                        for a in assets])
            mean_curve = acc / len(run.agents)
            if quantity == "consumption":
                bench = consumption_refined(sol, y, assets)
            else:
                bench = mpc_refined(sol, y, assets)
            panels.append([("learners (mean)", mean_curve), ("rational", bench)])
        two_panel_figure(
            cfg.out_dir / f"population_{quantity}.svg", assets, panels[0], panels[1],
            quantity, f"population mean after {p.n_periods} periods (seed {run.seed})",
            {**cfg.meta(), "quantity": quantity},
        )
    print(f"panel and figures written for seeds {cfg.seeds}")


def cmd_run(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    sol = _ensure_rational(cfg)
    if cfg.experiment == "pessimism":
        _run_pessimism(cfg, sol)  # rational agents only; no network involved
        return 0
    model = _ensure_pretrained(cfg, sol)
    if cfg.experiment == "extreme":
        _run_extreme(cfg, sol, model)
        return 0
    if cfg.experiment == "longrun":
        cfg = replace_params(cfg, n_periods=240) if cfg.params.n_periods < 240 else cfg
        _run_longrun(cfg, sol, model)
        return 0
    if cfg.experiment == "mpc":
        _run_mpc(cfg, model)
        return 0
    runs = _population_runs(cfg, model)
    if cfg.experiment == "scarring":
        _run_scarring(cfg, runs)
    else:
        _run_default(cfg, sol, runs)
    return 0


def replace_params(cfg: RunConfig, **kwargs) -> RunConfig:
    new = replace(cfg)
    new.params = replace(cfg.params, **kwargs)
    return new


def _band_note(value: float, band: tuple[float, float]) -> str:
    lo, hi = band
    return "within" if lo <= value <= hi else "OUTSIDE"


def cmd_report(out_dir: Path) -> int:
    """Summarize artifacts in a run directory against the reference bands."""
    out_dir = Path(out_dir)
    if not out_dir.exists():
        raise MissingArtifact(f"run directory {out_dir} does not exist")
    found = False
    lines = []
    mpc_path = out_dir / "mpc_groups.csv"
    if mpc_path.exists():
        found = True
        groups, meta = read_table(mpc_path)
        by = {r.group: r for r in groups.itertuples()}
        lines.append(f"liquidity MPC experiment (classify_at={by['low'].classify_at}):")
        lines.append(f"  low  mean MPC {by['low'].mpc:.3f} (n={by['low'].n})  "
                     f"[{_band_note(by['low'].mpc, REFERENCE['mpc_low'])} "
                     f"{REFERENCE['mpc_low']}]")
        lines.append(f"  high mean MPC {by['high'].mpc:.3f} (n={by['high'].n})  "
                     f"[{_band_note(by['high'].mpc, REFERENCE['mpc_high'])} "
                     f"{REFERENCE['mpc_high']}]")
        d = by["difference"]
        ok = "within" if d.mpc > REFERENCE["mpc_difference_min"] else "OUTSIDE"
        lines.append(f"  difference {d.mpc:.3f} (t={d.t_stat:.2f}{d.stars}) "
                     f"[{ok} > {REFERENCE['mpc_difference_min']}]")
    scar_path = out_dir / "scarring_table.csv"
    if scar_path.exists():
        found = True
        table, _ = read_table(scar_path)
        lines.append("scarring regressions:")
        for model_name, band_key in (("without_assets", "scarring_experience_without_assets"),
                                     ("with_assets", "scarring_experience_with_assets")):
            row = table[(table["model"] == model_name) & (table["term"] == "experience")]
            if not row.empty:
                c = float(row["coef"].iloc[0])
                s = str(row["stars_"].iloc[0]) if pd.notna(row["stars_"].iloc[0]) else ""
                lines.append(f"  experience ({model_name}) {c:.4f}{s} "
                             f"[{_band_note(c, REFERENCE[band_key])} {REFERENCE[band_key]}]")
    dist_path = out_dir / "longrun_distances.csv"
    if dist_path.exists():
        found = True
        dist, _ = read_table(dist_path)
        med = dist.groupby("t")["distance"].median().sort_index()
        lines.append("long-run policy distance (median over seeds):")
        for t_label, v in med.items():
            lines.append(f"  t={int(t_label):3d}: {v:.4f}")
        if {0, 10} <= set(med.index) and med.index.max() >= 10:
            drifted = med[0] < med[10]
            recovered = med[med.index.max()] < med[10]
            lines.append(f"  drift then recovery: {'yes' if drifted and recovered else 'no'}")
    pess_path = out_dir / "pessimism_curves.csv"
    if pess_path.exists():
        found = True
        _, meta = read_table(pess_path)
        stats = meta.get("stats", {})
        lines.append("pessimism experiment:")
        lines.append(f"  max consumption excess {stats.get('max_consumption_excess'):.3e} "
                     f"(should be <= 0)")
        lines.append(f"  max MPC excess {stats.get('max_mpc_excess'):.3e} (should be <= 1e-6)")
    ext_path = out_dir / "extreme_curves.csv"
    if ext_path.exists():
        found = True
        curves, _ = read_table(ext_path)
        t_final = int(curves["t"].max())
        sub = curves[curves["t"] == t_final]
        assets = np.sort(sub["assets"].unique())
        quartile = assets[: max(1, assets.size // 4)]
        worst = 0.0
        share_above = []
        for y in (0, 1):
            pick = lambda who: sub[(sub["agent"] == who) & (sub["income_state"] == y)].set_index("assets")["consumption"]  # noqa: E731
            un, em, ra = pick("unemployment"), pick("employment"), pick("rational")
            worst = max(worst, float((un - em).loc[quartile].max()))
            share_above.append(float((em > ra).mean()))
        lines.append("extreme-shock experiment:")
        lines.append(f"  scarred-minus-twin consumption on lowest asset quartile: max {worst:.4f} "
                     f"(should be < 0)")
        lines.append(f"  employment-twin share above rational: "
                     f"{min(share_above):.0%} (should be >= 90%)")
    if not found:
        raise MissingArtifact(f"no known artifacts under {out_dir}")
    print("\n".join(lines))
    return 0


# --- argument parsing -----------------------------------------------------------------


def _parse_seeds(args) -> list[int]:
    if args.seeds is not None:
        lo, _, hi = args.seeds.partition("..")
        try:
            seeds = list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise ConfigError(f"--seeds expects A..B, got {args.seeds!r}") from None
        if not seeds:
            raise ConfigError(f"--seeds {args.seeds!r} is an empty range")
        return seeds
    return [args.seed]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsave",
        description="Consumption-savings simulator with TD-learning agents",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p_sub):
        p_sub.add_argument("--config", type=Path, default=None,
                           help="flat key=value config file; empty file = baseline")
        p_sub.add_argument("--seed", type=int, default=0)
        p_sub.add_argument("--out", type=Path, default=Path("qsave_out"))
        p_sub.add_argument("--checkpoint", type=Path, default=None,
                           help="pretrained checkpoint path (default <out>/pretrained.ckpt)")

    pre = sub.add_parser("pretrain", help="fit the network to the rational benchmark")
    common(pre)
    pre.add_argument("--init-scale", choices=("he", "sqrt2"), default=None)

    run = sub.add_parser("run", help="simulate and run experiments")
    common(run)
    run.add_argument("--seeds", type=str, default=None, help="inclusive range A..B")
    run.add_argument("--experiment", choices=EXPERIMENTS, default=None)
    run.add_argument("--classify-at", type=int, default=0)
    run.add_argument("--smoothed", action="store_true",
                     help="use polynomial-smoothed policies in display figures")
    run.add_argument("--literal-update-sign", action=argparse.BooleanOptionalAction,
                     default=True,
                     help="TD update sign convention; the default raises the "
                          "continuation estimate after bad realizations "
                          "(--no-literal-update-sign for the toward-target ablation)")
    run.add_argument("--optimizer", choices=("sgd", "adam"), default=None,
                     help="online update rule (default sgd; adam is the ablation)")
    run.add_argument("--all-employed", action="store_true",
                     help="start every agent employed instead of drawing the stationary mix")
    run.add_argument("--pessimism-factor", type=float, default=None)

    rep = sub.add_parser("report", help="summarize run artifacts against reference bands")
    rep.add_argument("--out", type=Path, default=Path("qsave_out"))
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.out)
        cfg = load_run_config(args.config)
        cfg.out_dir = args.out
        cfg.checkpoint = args.checkpoint
        if args.command == "pretrain":
            cfg.seeds = [args.seed]
            if args.init_scale:
                cfg.init_scale = args.init_scale
            return cmd_pretrain(cfg)
        cfg.seeds = _parse_seeds(args)
        cfg.experiment = args.experiment
        cfg.classify_at = args.classify_at
        cfg.use_smoothed = args.smoothed
        cfg.literal_update_sign = args.literal_update_sign
        if args.optimizer:
            cfg.optimizer = args.optimizer
        cfg.all_employed = args.all_employed
        if args.pessimism_factor is not None:
            cfg.pessimism_factor = args.pessimism_factor
        return cmd_run(cfg)
    except QsaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
