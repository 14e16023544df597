"""Data representation, CSV ingestion, rescaling, splitting, and synthetic generators.

All containers are immutable after construction and safe to share across
concurrent tasks; anything random takes an explicit seed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .seeding import spawn

__all__ = [
    "DataError",
    "ConstantColumnWarning",
    "Dataset",
    "SyntheticSpec",
    "SplitPlan",
    "load_csv",
    "min_max_rescale",
    "generate_synthetic",
    "split_train_test",
    "subsample",
    "subsample_size_grid",
    "smooth_f1",
    "sinus_f2",
]


class DataError(Exception):
    """Raised when input data cannot be parsed or violates basic contracts."""


class ConstantColumnWarning(UserWarning):
    """A covariate column was constant and rescaled to all zeros."""


@dataclass(frozen=True)
class Dataset:
    """Fixed-design sample: covariate rows ``points`` and aligned ``responses``.

    Row i of ``points`` and entry i of ``responses`` describe the same
    observation. All entries must be finite.
    """

    points: np.ndarray
    responses: np.ndarray

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        resp = np.asarray(self.responses, dtype=np.float64).ravel()
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError("points must be a non-empty n x d matrix")
        if resp.shape[0] != pts.shape[0]:
            raise DataError(
                f"responses length {resp.shape[0]} does not match {pts.shape[0]} rows"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(resp)):
            raise DataError("points and responses must be finite (no NaN/Inf)")
        pts = pts.copy()
        resp = resp.copy()
        pts.flags.writeable = False
        resp.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "responses", resp)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Dataset restricted to the given row indices (order preserved)."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.points[idx], self.responses[idx])


def smooth_f1(x: np.ndarray) -> np.ndarray:
    """Smooth radial function 1.5 * (||x - 0.5|| / sqrt(3) - 0.5)."""
    x = np.atleast_2d(x)
    return 1.5 * (np.linalg.norm(x - 0.5, axis=1) / math.sqrt(3.0) - 0.5)


def sinus_f2(x: np.ndarray) -> np.ndarray:
    """Oscillating radial function 1.5 * sin(||x|| / sqrt(3))."""
    x = np.atleast_2d(x)
    return 1.5 * np.sin(np.linalg.norm(x, axis=1) / math.sqrt(3.0))


REGRESSION_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "f1": smooth_f1,
    "f2": sinus_f2,
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic draw: covariates uniform on [0,1]^d, Gaussian noise.

    ``regression_function`` is one of ``"f1"``, ``"f2"`` or ``"custom"``; a
    custom function maps an (n, d) array to an (n,) truth vector.
    """

    regression_function: str = "f1"
    noise_sd: float = 0.15
    sample_size: int = 100
    dimension: int = 3
    seed: int = 0
    custom_function: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.sample_size < 1 or self.dimension < 1:
            raise DataError("sample_size and dimension must be positive")
        if self.noise_sd < 0:
            raise DataError("noise_sd must be nonnegative")
        if self.regression_function == "custom":
            if self.custom_function is None:
                raise DataError("custom regression_function requires custom_function")
        elif self.regression_function not in REGRESSION_FUNCTIONS:
            raise DataError(f"unknown regression_function {self.regression_function!r}")

    def truth_function(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.regression_function == "custom":
            assert self.custom_function is not None
            return self.custom_function
        return REGRESSION_FUNCTIONS[self.regression_function]


@dataclass(frozen=True)
class SplitPlan:
    """Train fraction, sub-sample grid, and replication count for an experiment."""

    train_fraction: float = 0.7
    subsample_sizes: tuple[int, ...] = ()
    replications: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.train_fraction <= 1.0):
            raise DataError("train_fraction must lie in (0, 1]")
        if self.replications < 1:
            raise DataError("replications must be >= 1")
        if any(m < 1 for m in self.subsample_sizes):
            raise DataError("subsample sizes must be positive")

    def validate_for(self, n: int) -> None:
        n_train = math.ceil(self.train_fraction * n)
        too_big = [m for m in self.subsample_sizes if m > n_train]
        if too_big:
            raise DataError(
                f"subsample sizes {too_big} exceed train partition size {n_train}"
            )


def load_csv(path: str | Path, target_column: str | int) -> Dataset:
    """Parse a comma-delimited numeric table (header row, UTF-8) into a Dataset.

    The target column is removed from the covariates and stored as the
    response vector; remaining column order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty table: {path} has no header row") from None
        header = [h.strip() for h in header]
        if isinstance(target_column, int):
            if not (0 <= target_column < len(header)):
                raise DataError(
                    f"target column index {target_column} out of range "
                    f"(table has {len(header)} columns)"
                )
            target_idx = target_column
        else:
            if target_column not in header:
                raise DataError(
                    f"target column {target_column!r} not found; columns: {header}"
                )
            target_idx = header.index(target_column)
        rows: list[list[float]] = []
        for r, raw in enumerate(reader, start=1):
            if not raw or all(cell.strip() == "" for cell in raw):
                continue
            if len(raw) != len(header):
                raise DataError(
                    f"row {r} has {len(raw)} cells, expected {len(header)}"
                )
            parsed = []
            for c, cell in enumerate(raw):
                try:
                    value = float(cell)
                except ValueError:
                    value = math.nan
                if not math.isfinite(value):
                    raise DataError(
                        f"non-numeric value at row {r}, column {header[c]!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError(f"empty table: {path} has a header but no data rows")
    table = np.asarray(rows, dtype=np.float64)
    responses = table[:, target_idx]
    points = np.delete(table, target_idx, axis=1)
    if points.shape[1] == 0:
        raise DataError("table has no covariate columns besides the target")
    return Dataset(points, responses)


def min_max_rescale(ds: Dataset) -> Dataset:
    """Map every covariate column onto [0, 1] via (x - min) / (max - min).

    Responses are untouched. A constant column becomes all zeros and emits a
    ConstantColumnWarning; it then never influences Euclidean distances.
    """
    pts = ds.points.copy()
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    constant = span == 0.0
    if np.any(constant):
        cols = np.flatnonzero(constant).tolist()
        warnings.warn(
            f"constant covariate column(s) {cols} rescaled to zeros",
            ConstantColumnWarning,
            stacklevel=2,
        )
    safe = np.where(constant, 1.0, span)
    pts = (pts - lo) / safe
    pts[:, constant] = 0.0
    return Dataset(pts, ds.responses)


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Draw one synthetic dataset and return it with the noiseless truth vector.

    Covariates are i.i.d. uniform on [0,1]^d; responses are truth plus
    N(0, noise_sd^2) noise. Fully deterministic given ``spec.seed``: the
    covariates are drawn first, then the noise, so the design is shared
    across specs differing only in ``noise_sd``.
    """
    rng = spawn(spec.seed)
    x = rng.random((spec.sample_size, spec.dimension))
    truth = np.asarray(spec.truth_function()(x), dtype=np.float64).ravel()
    if truth.shape[0] != spec.sample_size:
        raise DataError("regression function returned wrong-length truth vector")
    noise = spec.noise_sd * rng.standard_normal(spec.sample_size)
    ds = Dataset(x, truth + noise)
    return ds, truth


def split_train_test(
    ds: Dataset, fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Random disjoint partition with train size ceil(fraction * n)."""
    if not (0.0 < fraction < 1.0):
        raise DataError("fraction must lie strictly between 0 and 1")
    n_train = math.ceil(fraction * ds.n)
    if n_train == 0 or n_train == ds.n:
        raise DataError(f"split of n={ds.n} at fraction={fraction} leaves a part empty")
    rng = spawn(seed)
    perm = rng.permutation(ds.n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.take(train_idx), ds.take(test_idx)


def subsample(ds: Dataset, m: int, seed: int) -> Dataset:
    """Draw m rows without replacement, deterministic per seed."""
    if not (1 <= m <= ds.n):
        raise DataError(f"subsample size {m} out of range [1, {ds.n}]")
    rng = spawn(seed)
    idx = rng.choice(ds.n, size=m, replace=False)
    return ds.take(idx)


def subsample_size_grid(
    n_train: int, divisors: Sequence[int] = (5, 4, 3, 2, 1)
) -> list[int]:
    """Sub-sample size grid {floor(n_train / q) for q in divisors}, ascending.

    Duplicate sizes (possible for small n_train) are collapsed.
    """
    if any(q < 1 for q in divisors):
        raise DataError("divisors must be positive integers")
    return sorted({n_train // q for q in divisors})
