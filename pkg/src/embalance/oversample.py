"""Embedding-space oversamplers: SMOTE, Borderline-SMOTE, Balanced-SVM and EOS.

Every sampler tops each class up to the majority count. Synthetic rows are
interpolations ``base + r * (other - base)`` with ``r ~ U[0, 1)``; EOS draws
``other`` from the base's nearest *enemies* (neighbors of another class),
the SMOTE family from same-class neighbors. With ``away_from_enemy`` EOS
instead extrapolates ``base + r * (base - enemy)``.

Output sets list the original rows first, then synthetic rows grouped by class.
Provenance rows index into the original set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from embalance.errors import ConfigError, DataError, NumericalError
from embalance.head import TrainConfig, predict, train_svm
from embalance.neighbors import enemy_neighbors, knn, knn_arrays
from embalance.store import LabeledEmbeddingSet, partition_by_class, to_bytes

log = logging.getLogger(__name__)

DIRECTIONS = ("toward_enemy", "away_from_enemy")
METHODS = ("none", "smote", "borderline_smote", "balanced_svm", "eos")


@dataclass(frozen=True)
class OversampleConfig:
    k: int = 10
    seed: int = 0
    eos_direction: str = "toward_enemy"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"K must be >= 1, got {self.k}")
        if self.eos_direction not in DIRECTIONS:
            raise ConfigError(f"eos_direction must be one of {DIRECTIONS}, got {self.eos_direction!r}")


@dataclass(frozen=True, eq=False)
class SyntheticBatch:
    """Synthetic rows with provenance.

    Row ``i`` equals ``base + signs[i] * r[i] * (neighbor - base)``: sign +1
    interpolates toward the neighbor, -1 extrapolates away from it.
    """

    features: np.ndarray
    labels: np.ndarray
    base_rows: np.ndarray
    neighbor_rows: np.ndarray
    r_values: np.ndarray
    signs: np.ndarray
    # class -> reason, for classes generated by a fallback rule
    fallbacks: dict[int, str] = field(default_factory=dict)
    # balanced_svm only: number of synthetic rows whose label changed
    relabeled: int = 0

    @property
    def size(self) -> int:
        return self.features.shape[0]

    def reconstruct(self, original: np.ndarray) -> np.ndarray:
        """Recompute every synthetic row from its provenance."""
        return _interpolate(original, self.base_rows, self.neighbor_rows, self.r_values, self.signs)

    def save(self, features_path, provenance_path, class_count: int) -> None:
        """Binary embedding file of the synthetic rows plus a provenance CSV.

        The synthetic rows usually miss some classes, so the completeness
        check of :func:`embalance.store.save` does not apply here.
        """
        Path(features_path).write_bytes(to_bytes(LabeledEmbeddingSet(self.features, self.labels, class_count)))
        lines = ["label,base_row,neighbor_row,r,sign"]
        for label, base, nbr, r, sign in zip(self.labels, self.base_rows, self.neighbor_rows,
                                             self.r_values, self.signs):
            lines.append(f"{int(label)},{int(base)},{int(nbr)},{float(r)!r},{int(sign)}")
        Path(provenance_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def majority_targets(dataset: LabeledEmbeddingSet) -> np.ndarray:
    hist = dataset.histogram()
    return np.full(dataset.class_count, hist.max())


def _class_rngs(seed: int, C: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(C)]


def _effective_k(k: int, n: int) -> int:
    return max(1, min(k, n - 1))


def _interpolate(points, base_rows, other_rows, r, signs):
    base = points[base_rows]
    step = r[:, None] * (points[other_rows] - base)
    return np.where(signs[:, None] < 0, base - step, base + step)


def _smote_class(dataset, rows, pool, deficit, k, rng):
    """``deficit`` SMOTE samples for one class, bases drawn from ``pool``.

    ``rows`` are the class's row indices in the full set; same-class neighbors
    are searched among them only. Returns (base_rows, neighbor_rows, r, signs).
    """
    if len(rows) == 1:
        base = np.repeat(rows, deficit)
        return base, base.copy(), np.zeros(deficit), np.ones(deficit)
    local_k = min(k, len(rows) - 1)
    pool_pos = np.searchsorted(rows, pool)
    nbr, _ = knn_arrays(dataset.features[rows], local_k, queries=pool_pos)
    pick = rng.integers(len(pool), size=deficit)
    col = rng.integers(local_k, size=deficit)
    r = rng.random(deficit)
    return rows[pool_pos[pick]], rows[nbr[pick, col]], r, np.ones(deficit)


def _finish(dataset, per_class, fallbacks):
    """Assemble (balanced set, batch) from per-class (base, other, r, sign) arrays."""
    parts = [per_class[c] for c in sorted(per_class)]
    counts = [len(p[0]) for p in parts]
    base, other, r, signs = (np.concatenate([p[i] for p in parts]) if parts else np.zeros(0)
                             for i in range(4))
    base = base.astype(np.int64)
    other = other.astype(np.int64)
    signs = signs.astype(np.int8)
    labels = np.repeat(np.array(sorted(per_class), dtype=np.int64), counts)
    synth = _interpolate(dataset.features, base, other, r, signs)
    batch = SyntheticBatch(synth, labels, base, other, r, signs, dict(fallbacks))
    return _append(dataset, batch), batch


def _append(dataset, batch):
    return LabeledEmbeddingSet(
        np.vstack([dataset.features, batch.features]),
        np.concatenate([dataset.labels, batch.labels]),
        dataset.class_count,
    )


def _deficits(dataset):
    hist = dataset.histogram()
    empty = np.flatnonzero(hist == 0)
    if empty.size:
        raise DataError(f"cannot oversample classes with no rows: {empty.tolist()}")
    return majority_targets(dataset) - hist


def smote(dataset: LabeledEmbeddingSet, config: OversampleConfig):
    """Interpolate between random class members and their same-class neighbors."""
    deficits = _deficits(dataset)
    parts = partition_by_class(dataset)
    rngs = _class_rngs(config.seed, dataset.class_count)
    per_class, fallbacks = {}, {}
    for c, rows in enumerate(parts):
        if deficits[c] == 0:
            continue
        if len(rows) == 1:
            fallbacks[c] = "single row: duplicated"
            log.warning("class %d has a single row; duplicating it", c)
        per_class[c] = _smote_class(dataset, rows, rows, deficits[c], config.k, rngs[c])
    return _finish(dataset, per_class, fallbacks)


def _enemy_lists(dataset, k):
    table = knn(dataset, _effective_k(k, dataset.n))
    return enemy_neighbors(table, dataset.labels)


def borderline_smote(dataset: LabeledEmbeddingSet, config: OversampleConfig):
    """SMOTE restricted to bases whose K-NN over the full set hold at least one enemy."""
    deficits = _deficits(dataset)
    enemies = _enemy_lists(dataset, config.k)
    parts = partition_by_class(dataset)
    rngs = _class_rngs(config.seed, dataset.class_count)
    per_class, fallbacks = {}, {}
    for c, rows in enumerate(parts):
        if deficits[c] == 0:
            continue
        pool = np.array([i for i in rows if len(enemies[i])], dtype=np.int64)
        if len(rows) == 1:
            fallbacks[c] = "single row: duplicated"
            pool = rows
        elif pool.size == 0:
            fallbacks[c] = "no borderline instances: smote"
            log.warning("class %d has no borderline instances; using plain SMOTE", c)
            pool = rows
        per_class[c] = _smote_class(dataset, rows, pool, deficits[c], config.k, rngs[c])
    return _finish(dataset, per_class, fallbacks)


def eos(dataset: LabeledEmbeddingSet, config: OversampleConfig):
    """Expansive oversampling: pair border instances with their nearest enemies.

    Bases are drawn uniformly from class members that have an enemy among
    their K nearest neighbors; the partner is drawn uniformly from that base's
    enemies. Neighborhoods are computed once on the input set.
    """
    deficits = _deficits(dataset)
    enemies = _enemy_lists(dataset, config.k)
    parts = partition_by_class(dataset)
    rngs = _class_rngs(config.seed, dataset.class_count)
    away = config.eos_direction == "away_from_enemy"
    per_class, fallbacks = {}, {}
    for c, rows in enumerate(parts):
        if deficits[c] == 0:
            continue
        pool = np.array([i for i in rows if len(enemies[i])], dtype=np.int64)
        if pool.size == 0:
            reason = "no enemy neighbors: smote"
            if len(rows) == 1:
                reason = "no enemy neighbors, single row: duplicated"
            fallbacks[c] = reason
            log.warning("class %d: %s", c, reason)
            per_class[c] = _smote_class(dataset, rows, rows, deficits[c], config.k, rngs[c])
            continue
        rng = rngs[c]
        deficit = deficits[c]
        pick = pool[rng.integers(pool.size, size=deficit)]
        partner = np.array([enemies[i][j] for i, j in
                            zip(pick, rng.integers(np.array([len(enemies[i]) for i in pick])))],
                           dtype=np.int64)
        per_class[c] = (pick, partner, rng.random(deficit), np.full(deficit, -1 if away else 1))
    return _finish(dataset, per_class, fallbacks)


def default_svm_config(seed: int = 0) -> TrainConfig:
    return TrainConfig(epochs=100, learning_rate=0.05, batch_size=32, weight_decay=1e-4, seed=seed)


def balanced_svm(dataset: LabeledEmbeddingSet, config: OversampleConfig, svm_config: TrainConfig | None = None):
    """SMOTE, then relabel every synthetic row with a linear one-vs-rest SVM's prediction.

    The resulting histogram may deviate from exact balance.
    """
    svm_config = svm_config or default_svm_config(config.seed)
    _, batch = smote(dataset, config)
    svm = train_svm(dataset, svm_config)
    if not np.isfinite(svm.weights).all():
        raise NumericalError("SVM weights are not finite")
    new_labels = predict(svm, batch.features) if batch.size else batch.labels
    relabeled = int(np.sum(new_labels != batch.labels))
    log.info("balanced_svm relabeled %d of %d synthetic rows", relabeled, batch.size)
    batch = SyntheticBatch(batch.features, new_labels.astype(np.int64), batch.base_rows, batch.neighbor_rows,
                           batch.r_values, batch.signs, batch.fallbacks, relabeled)
    return _append(dataset, batch), batch
