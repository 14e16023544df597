"""Per-point neighbor orderings under Euclidean distance with seeded tie-breaking.

A NeighborTable row lists all sample indices sorted by distance to that row's
point, self first; it implicitly defines the whole family of row-stochastic
smoothing matrices, one per neighbor count k. Dense matrices are materialized
only for oracle checks.

Distances are computed brute force in O(n^2 d): sample sizes here stay in the
thousands and the full orderings (all k) are needed anyway. A space
partitioning tree would only pay off for single-k queries on larger data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .seeding import spawn

__all__ = [
    "NeighborTable",
    "QueryNeighbors",
    "build_table",
    "build_query_neighbors",
    "materialize_matrix",
    "save_table",
    "load_table",
]

_MAGIC = b"KNNT"
_VERSION = 1


@dataclass(frozen=True)
class NeighborTable:
    """All-pairs neighbor ordering for one dataset.

    ``order[i]`` is a permutation of {0..n-1} sorted by distance to point i,
    ascending, with ``order[i][0] == i``. ``sq_distances`` is aligned with
    ``order`` and stores squared Euclidean distances (ordering-equivalent and
    cheaper; take ``distances`` for the square roots).
    """

    order: np.ndarray
    sq_distances: np.ndarray
    dim: int
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", _frozen(self.order, np.int64))
        object.__setattr__(self, "sq_distances", _frozen(self.sq_distances, np.float64))

    @property
    def n(self) -> int:
        return self.order.shape[0]

    @property
    def distances(self) -> np.ndarray:
        return np.sqrt(self.sq_distances)


@dataclass(frozen=True)
class QueryNeighbors:
    """Orderings of training indices around external query points.

    Query points are not part of the training sample, so no self entry.
    """

    order: np.ndarray
    sq_distances: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", _frozen(self.order, np.int64))
        object.__setattr__(self, "sq_distances", _frozen(self.sq_distances, np.float64))

    @property
    def n_queries(self) -> int:
        return self.order.shape[0]

    @property
    def n_train(self) -> int:
        return self.order.shape[1]

    @property
    def distances(self) -> np.ndarray:
        return np.sqrt(self.sq_distances)


def _frozen(a: np.ndarray, dtype: type) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    if out.base is None and out is a:
        out = out.copy()
    out.flags.writeable = False
    return out


def _sq_dist_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Accumulate (a_i - b_j)^2 one coordinate at a time: exact, symmetric,
    # and memory stays O(len(a) * len(b)) instead of O(.. * d).
    out = np.zeros((a.shape[0], b.shape[0]))
    for dim in range(a.shape[1]):
        diff = a[:, dim, None] - b[None, :, dim]
        out += diff * diff
    return out


def _tie_broken_order(sqd: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sort each row of ``sqd`` ascending, breaking ties by a seeded shuffle.

    A random permutation of the candidate indices is applied before a stable
    sort, so equal distances appear in shuffled order, reproducibly.
    """
    n_cand = sqd.shape[1]
    perm = rng.permutation(n_cand)
    positions = np.argsort(sqd[:, perm], axis=1, kind="stable")
    return perm[positions]


def build_table(ds: Dataset, seed: int = 0) -> NeighborTable:
    """Build the full neighbor ordering for a dataset, deterministic per seed."""
    sqd = _sq_dist_matrix(ds.points, ds.points)
    # Self must come first even when another point coincides exactly; a
    # below-range sentinel keeps it ahead of any zero-distance tie.
    np.fill_diagonal(sqd, -1.0)
    order = _tie_broken_order(sqd, spawn(seed, 0x6E62))
    np.fill_diagonal(sqd, 0.0)
    aligned = np.take_along_axis(sqd, order, axis=1)
    return NeighborTable(order=order, sq_distances=aligned, dim=ds.d, seed=seed)


def build_query_neighbors(
    train: Dataset, queries: np.ndarray, seed: int = 0
) -> QueryNeighbors:
    """Order all training points around each query point (query excluded)."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if q.shape[0] == 0:
        return QueryNeighbors(
            order=np.empty((0, train.n), dtype=np.int64),
            sq_distances=np.empty((0, train.n)),
        )
    if q.shape[1] != train.d:
        raise ValueError(
            f"query dimension {q.shape[1]} does not match training dimension {train.d}"
        )
    sqd = _sq_dist_matrix(q, train.points)
    order = _tie_broken_order(sqd, spawn(seed, 0x7172))
    aligned = np.take_along_axis(sqd, order, axis=1)
    return QueryNeighbors(order=order, sq_distances=aligned)


def materialize_matrix(table: NeighborTable, k: int) -> np.ndarray:
    """Dense n x n smoothing matrix: 1/k on each point's k nearest neighbors."""
    n = table.n
    if not (1 <= k <= n):
        raise ValueError(f"k={k} out of range [1, {n}]")
    a = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    a[rows, table.order[:, :k].ravel()] = 1.0 / k
    return a


def save_table(table: NeighborTable, path: str | Path) -> None:
    """Dump a NeighborTable to a binary file.

    Layout: magic ``KNNT``, u16 version, u64 n, u64 dim, i64 seed, then the
    order matrix (int64, row-major) and the squared-distance matrix (float64,
    row-major), all little-endian.
    """
    path = Path(path)
    n = table.n
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HQQq", _VERSION, n, table.dim, table.seed))
        fh.write(np.ascontiguousarray(table.order, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(table.sq_distances, dtype="<f8").tobytes())


def load_table(path: str | Path) -> NeighborTable:
    """Read a NeighborTable written by :func:`save_table`."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path} is not a neighbor-table file")
    version, n, dim, seed = struct.unpack_from("<HQQq", raw, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported neighbor-table version {version}")
    offset = 4 + struct.calcsize("<HQQq")
    count = n * n
    order = np.frombuffer(raw, dtype="<i8", count=count, offset=offset)
    offset += count * 8
    sqd = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
    return NeighborTable(
        order=order.reshape(n, n).astype(np.int64),
        sq_distances=sqd.reshape(n, n).astype(np.float64),
        dim=int(dim),
        seed=int(seed),
    )
