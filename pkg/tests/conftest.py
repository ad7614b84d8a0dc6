"""Shared fixtures.

Expensive artifacts (rational solution, pretrained checkpoint, multi-seed
experiment batteries) are cached under .cache_artifacts/ at the repo root so
repeated pytest runs stay fast.  Delete that directory to force a full
recompute; everything in it is reproducible from seeds recorded in the
sidecar JSON files.
"""

from __future__ import annotations

import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from qsave.core import ModelParams, validate_params
from qsave.neuralnet import load_checkpoint, pretrain, save_checkpoint
from qsave.rational import load_solution, save_solution, solve_value_iteration
from qsave.simulate import ScfDistribution

CACHE = Path(__file__).resolve().parent.parent / ".cache_artifacts"


@pytest.fixture(scope="session")
def cache_dir() -> Path:
    CACHE.mkdir(exist_ok=True)
    return CACHE


@pytest.fixture(scope="session")
def params() -> ModelParams:
    return validate_params(ModelParams())


@pytest.fixture(scope="session")
def tiny_params() -> ModelParams:
    """Small grids and network for unit tests that exercise code paths only."""
    return validate_params(replace(
        ModelParams(),
        savings_grid_n=400, train_grid_n=60, hidden_dim=12,
        n_agents=6, n_periods=12, poly_eval_n=20,
    ))


@pytest.fixture(scope="session")
def scf() -> ScfDistribution:
    return ScfDistribution()


@pytest.fixture(scope="session")
def rational(params, cache_dir):
    """Full-size rational solution; the solve is timed once and cached."""
    csv = cache_dir / "rational.csv"
    meta = cache_dir / "rational_meta.json"
    if csv.exists() and meta.exists():
        return load_solution(csv)
    t0 = time.perf_counter()
    sol = solve_value_iteration(params)
    seconds = time.perf_counter() - t0
    save_solution(sol, csv)
    meta.write_text(json.dumps({"solve_seconds": seconds}))
    return sol


@pytest.fixture(scope="session")
def rational_solve_seconds(rational, cache_dir) -> float:
    # depends on `rational` so the sidecar exists even on a cold cache
    return json.loads((cache_dir / "rational_meta.json").read_text())["solve_seconds"]


@pytest.fixture(scope="session")
def pretrained(params, rational, cache_dir):
    """Canonical pretrained network (seed 0) plus its training report."""
    ckpt = cache_dir / "pretrained.ckpt"
    meta = cache_dir / "pretrain_report.json"
    if ckpt.exists() and meta.exists():
        model, _ = load_checkpoint(ckpt)
        return model, json.loads(meta.read_text())
    t0 = time.perf_counter()
    model, report = pretrain(rational, params, np.random.default_rng(0))
    seconds = time.perf_counter() - t0
    summary = {
        "seed": 0,
        "epochs": report.epochs,
        "heldout_error": report.heldout_error,
        "policy_error": report.policy_error,
        "monotone": report.monotone,
        "wall_seconds": seconds,
    }
    save_checkpoint(model, ckpt, meta={"seed": 0, "epochs": report.epochs})
    meta.write_text(json.dumps(summary))
    return model, summary


@pytest.fixture(scope="session")
def pretrained_model(pretrained):
    return pretrained[0]
