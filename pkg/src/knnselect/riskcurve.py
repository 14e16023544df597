"""Empirical risk curve, its expectation, and monotone envelopes in the
degrees-of-freedom domain.

The reparameterization lambda = n/k turns the neighbor count into the model's
effective degrees of freedom; the risk curve is roughly decreasing in lambda,
and its tightest non-increasing lower/upper bounds serve as stopping-rule
diagnostics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .estimator import FitSurface, OracleCurves

__all__ = ["RiskCurve", "LambdaCurve", "empirical_risk", "expected_empirical_risk", "to_lambda", "export_risk_csv"]


@dataclass(frozen=True)
class RiskCurve:
    """Training error R_k = mean_i (y_i - fit_k(x_i))^2 over the evaluated grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if grid.shape != values.shape or grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid and values must be equal-length 1-D arrays")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def at(self, k: int) -> float:
        idx = np.searchsorted(self.grid, k)
        if idx >= self.grid.size or self.grid[idx] != k:
            raise KeyError(f"k={k} not on the evaluated grid")
        return float(self.values[idx])

    def restrict(self, k_min: int) -> "RiskCurve":
        mask = self.grid >= k_min
        if not mask.any():
            raise ValueError(f"no grid points at or above k={k_min}")
        return RiskCurve(self.grid[mask], self.values[mask])


@dataclass(frozen=True)
class LambdaCurve:
    """Risk curve over lambda = n/k (ascending) with monotone envelopes.

    ``lower`` is the running minimum scanning lambda upward (tightest
    non-increasing lower bound); ``upper`` is the running maximum scanning
    lambda downward from its largest value (tightest non-increasing upper
    bound). ``ks`` is aligned with ``lambda_grid`` (descending).
    """

    lambda_grid: np.ndarray
    ks: np.ndarray
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def empirical_risk(ds: Dataset, surface: FitSurface) -> RiskCurve:
    """Empirical risk for every k the surface covers."""
    residuals = surface.fits - ds.responses[None, :]
    values = (residuals**2).mean(axis=1)
    return RiskCurve(grid=np.arange(1, surface.k_max + 1), values=values)


def expected_empirical_risk(oracle: OracleCurves) -> np.ndarray:
    """Noise-expectation of the empirical risk: sigma^2 + bias_sq(k) - variance(k),
    aligned with ``oracle.ks``."""
    return oracle.sigma_sq + oracle.bias_sq - oracle.variance


def to_lambda(curve: RiskCurve, n: int) -> LambdaCurve:
    """Reparameterize a risk curve by lambda = n/k and attach both envelopes."""
    ks = curve.grid[::-1].copy()
    values = curve.values[::-1].copy()
    lam = n / ks
    lower = np.minimum.accumulate(values)
    upper = np.maximum.accumulate(values[::-1])[::-1].copy()
    return LambdaCurve(lambda_grid=lam, ks=ks, values=values, lower=lower, upper=upper)


def export_risk_csv(curve: RiskCurve, path: str | Path) -> None:
    """Write the curve as two-column CSV (k, risk) for plotting."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "risk"])
        for k, r in zip(curve.grid.tolist(), curve.values.tolist()):
            writer.writerow([k, repr(r)])
