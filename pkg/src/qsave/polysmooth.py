"""Polynomial smoothing of the network continuation value.

A degree-5 least-squares polynomial per income state, fit on poly_eval_n
equally spaced savings points.  Inputs are affinely rescaled to [-1, 1]
before building the Vandermonde matrix (conditioning), the normal problem is
solved by QR, and evaluation uses Horner's rule.  Smoothed values feed display
policies and cross-sectional figures only; learning always uses the raw
network.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import IncomeState, ModelParams
from .errors import SingularFit
from .neuralnet import EVModel, forward_batch


@dataclass(frozen=True, eq=False)
class PolySmoothedEV:
    """Fitted coefficients (ascending powers of the rescaled input) per state."""

    coeffs: np.ndarray  # shape (2, degree + 1)
    domain: tuple[float, float]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1


def _rescale(a: np.ndarray, domain: tuple[float, float]) -> np.ndarray:
    lo, hi = domain
    return 2.0 * (a - lo) / (hi - lo) - 1.0


def fit_poly(model: EVModel, p: ModelParams) -> PolySmoothedEV:
    """Fit the smoothing polynomial to the current network, both income states."""
    grid = np.linspace(p.a_min, p.a_max, p.poly_eval_n)
    domain = (p.a_min, p.a_max)
    z = _rescale(grid, domain)
    vand = np.vander(z, p.poly_degree + 1, increasing=True)
    q, r = np.linalg.qr(vand)
    diag = np.abs(np.diag(r))
    if np.any(diag < 1e-12 * diag.max()):
        raise SingularFit(f"Vandermonde rank deficient at degree {p.poly_degree}")
    coeffs = np.empty((2, p.poly_degree + 1))
    for y in (IncomeState.EMPLOYED, IncomeState.UNEMPLOYED):
        targets = forward_batch(model, p.income_value(y), grid)
        coeffs[int(y)] = np.linalg.solve(r, q.T @ targets)
    return PolySmoothedEV(coeffs=coeffs, domain=domain)


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    acc = np.full_like(z, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def smoothed_ev(fit: PolySmoothedEV, y: IncomeState, a_next) -> np.ndarray | float:
    """Evaluate the smoothed continuation value; clamps outside the fit domain."""
    a = np.asarray(a_next, dtype=float)
    lo, hi = fit.domain
    if np.any(a < lo) or np.any(a > hi):
        warnings.warn("smoothed_ev evaluated outside fit domain; clamping", stacklevel=2)
        a = np.clip(a, lo, hi)
    out = _horner(fit.coeffs[int(y)], _rescale(a, fit.domain))
    return float(out) if np.isscalar(a_next) else out


def smoothed_ev_derivative(fit: PolySmoothedEV, y: IncomeState, a_next) -> np.ndarray | float:
    """Analytic derivative d EV / d a' of the smoothed fit (chain rule on rescale)."""
    a = np.clip(np.asarray(a_next, dtype=float), *fit.domain)
    c = fit.coeffs[int(y)]
    dc = c[1:] * np.arange(1, c.size)
    lo, hi = fit.domain
    out = _horner(dc, _rescale(a, fit.domain)) * (2.0 / (hi - lo))
    return float(out) if np.isscalar(a_next) else out
