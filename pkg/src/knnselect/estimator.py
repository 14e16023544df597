"""Neighbor-average fits for every k via running prefix means, plus oracle curves.

Fitted values for all k come from one pass of per-point running sums over the
neighbor ordering, O(n * k_max) after the table is built; the dense smoothing
matrix is never formed outside oracle tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .neighbors import NeighborTable, QueryNeighbors

__all__ = ["FitSurface", "OracleCurves", "prefix_means", "fit_all", "predict", "oracle_curves"]


def prefix_means(values: np.ndarray, order: np.ndarray, k_max: int) -> np.ndarray:
    """Running neighbor averages: row k-1 holds the mean of ``values`` over the
    first k entries of each ordering row. Shape (k_max, n_rows)."""
    gathered = values[order[:, :k_max]]
    sums = np.cumsum(gathered, axis=1)
    return (sums / np.arange(1.0, k_max + 1.0)).T


@dataclass(frozen=True)
class FitSurface:
    """Fitted values for every neighbor count: ``fits[k-1, i]`` averages the
    responses of point i's k nearest neighbors (self included)."""

    fits: np.ndarray
    k_max: int

    def at(self, k: int) -> np.ndarray:
        if not (1 <= k <= self.k_max):
            raise ValueError(f"k={k} out of range [1, {self.k_max}]")
        return self.fits[k - 1]


@dataclass(frozen=True)
class OracleCurves:
    """Squared bias, variance sigma^2/k, and their sum over k = 1..k_max.

    Computable only when the truth vector is known; used as the reference the
    data-driven rules are judged against.
    """

    ks: np.ndarray
    bias_sq: np.ndarray
    variance: np.ndarray
    sigma_sq: float

    @property
    def mse(self) -> np.ndarray:
        return self.bias_sq + self.variance

    def bias_sq_at(self, k: int) -> float:
        return float(self.bias_sq[k - 1])

    def variance_at(self, k: int) -> float:
        return float(self.variance[k - 1])


def fit_all(ds: Dataset, table: NeighborTable, k_max: int) -> FitSurface:
    """Fitted values for k = 1..k_max via per-point running prefix sums."""
    if not (1 <= k_max <= ds.n):
        raise ValueError(f"k_max={k_max} out of range [1, {ds.n}]")
    return FitSurface(fits=prefix_means(ds.responses, table.order, k_max), k_max=k_max)


def predict(train: Dataset, qn: QueryNeighbors, k: int) -> np.ndarray:
    """Out-of-sample prediction: mean response of each query's k nearest
    training points."""
    if not (1 <= k <= qn.n_train):
        raise ValueError(f"k={k} out of range [1, {qn.n_train}]")
    return train.responses[qn.order[:, :k]].mean(axis=1)


def predict_all(train: Dataset, qn: QueryNeighbors, k_max: int) -> np.ndarray:
    """Predictions for every k = 1..k_max at once, shape (k_max, n_queries)."""
    if not (1 <= k_max <= qn.n_train):
        raise ValueError(f"k_max={k_max} out of range [1, {qn.n_train}]")
    return prefix_means(train.responses, qn.order, k_max)


def oracle_curves(
    truth: np.ndarray, table: NeighborTable, sigma_sq: float, k_max: int
) -> OracleCurves:
    """Squared bias and variance curves from a known truth vector.

    bias_sq(k) is the empirical-norm distance between the truth and its
    k-neighbor average; variance(k) = sigma_sq / k.
    """
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if truth.shape[0] != table.n:
        raise ValueError("truth vector length does not match table size")
    if not (1 <= k_max <= table.n):
        raise ValueError(f"k_max={k_max} out of range [1, {table.n}]")
    smoothed = prefix_means(truth, table.order, k_max)
    bias_sq = ((smoothed - truth[None, :]) ** 2).mean(axis=1)
    ks = np.arange(1, k_max + 1)
    variance = sigma_sq / ks
    return OracleCurves(ks=ks, bias_sq=bias_sq, variance=variance, sigma_sq=float(sigma_sq))
