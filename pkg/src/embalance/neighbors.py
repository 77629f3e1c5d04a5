"""Exact brute-force Euclidean k-nearest neighbors with lower-index tie-breaking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from embalance.errors import ConfigError

# Upper bound on elements in one (chunk, n, d) difference tensor.
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class NeighborTable:
    """``indices[q]`` are the K nearest rows to query ``q`` in ascending distance."""

    indices: np.ndarray
    distances: np.ndarray
    self_excluded: bool

    @property
    def k(self) -> int:
        return self.indices.shape[1]


def pairwise_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Euclidean distances from the explicit coordinate differences.

    The expanded ``|a|^2 + |b|^2 - 2ab`` form is avoided because its rounding
    separates points that are exactly equidistant.
    """
    return np.sqrt(np.square(queries[:, None, :] - points[None, :, :]).sum(axis=-1))


def knn_arrays(points: np.ndarray, k: int, self_excluded: bool = True,
               queries: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points, dtype=np.float64)
    n, d = points.shape
    limit = n - 1 if self_excluded else n
    if not 1 <= k <= limit:
        raise ConfigError(f"K={k} out of range [1, {limit}] for {n} rows")
    if queries is None:
        queries = np.arange(n)
    step = max(1, _CHUNK_ELEMENTS // max(1, n * d))
    indices = np.empty((len(queries), k), dtype=np.int64)
    distances = np.empty((len(queries), k))
    for start in range(0, len(queries), step):
        rows = queries[start:start + step]
        dist = pairwise_distances(points[rows], points)
        if self_excluded:
            dist[np.arange(len(rows)), rows] = np.inf
        # stable sort keeps equal distances in ascending index order
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        indices[start:start + step] = order
        distances[start:start + step] = np.take_along_axis(dist, order, axis=1)
    return indices, distances


def knn(dataset, k: int, self_excluded: bool = True) -> NeighborTable:
    """K nearest neighbors of every row of ``dataset`` (a set or a raw matrix)."""
    points = getattr(dataset, "features", dataset)
    indices, distances = knn_arrays(points, k, self_excluded)
    return NeighborTable(indices, distances, self_excluded)


def enemy_neighbors(table: NeighborTable, labels) -> list[np.ndarray]:
    """For each query, its neighbors whose label differs from the query's, in distance order."""
    labels = np.asarray(labels)
    own = labels[: table.indices.shape[0], None]
    mask = labels[table.indices] != own
    return [row[m] for row, m in zip(table.indices, mask)]
