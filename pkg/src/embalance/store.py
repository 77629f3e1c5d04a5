"""Labeled embedding sets: data model, CSV/binary I/O, imbalance profiles and
synthetic Gaussian-mixture generation.

Binary layout (little-endian)::

    b"EMB1" | u32 n | u32 d | u32 C | n x u32 labels | n*d x f32 features (row-major)

CSV layout: header ``label,f0,...,f{d-1}`` then one row per instance. An
optional leading ``# classes=C`` line declares the class count when it is not
``1 + max(label)``.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from embalance.errors import ConfigError, DataError

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class LabeledEmbeddingSet:
    """An ``n x d`` feature-embedding matrix with dense integer labels in ``[0, C)``."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        labels = np.array(self.labels, copy=True)
        if features.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {features.shape}")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DataError(
                f"labels length {labels.shape[0] if labels.ndim else 0} "
                f"does not match feature rows {features.shape[0]}"
            )
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise DataError("labels must be integers")
        labels = labels.astype(np.int64)
        if features.shape[1] < 1:
            raise DataError("embedding dimension must be >= 1")
        if int(self.class_count) < 2:
            raise DataError(f"class_count must be >= 2, got {self.class_count}")
        bad = np.flatnonzero((labels < 0) | (labels >= self.class_count))
        if bad.size:
            i = int(bad[0])
            raise DataError(f"row {i}: label {labels[i]} outside [0, {self.class_count})")
        nonfinite = np.flatnonzero(~np.isfinite(features).all(axis=1))
        if nonfinite.size:
            raise DataError(f"row {int(nonfinite[0])}: non-finite feature value")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_count", int(self.class_count))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, rows) -> "LabeledEmbeddingSet":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledEmbeddingSet(self.features[rows], self.labels[rows], self.class_count)

    def require_complete(self) -> None:
        """Raise unless the set is non-empty and every class has at least one row."""
        if self.n == 0:
            raise DataError("embedding set has no rows")
        empty = np.flatnonzero(self.histogram() == 0)
        if empty.size:
            raise DataError(f"classes with no rows: {empty.tolist()}")

    def equals(self, other: "LabeledEmbeddingSet") -> bool:
        return (
            self.class_count == other.class_count
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features)
        )


def partition_by_class(dataset: LabeledEmbeddingSet) -> list[np.ndarray]:
    """Row indices per class, in ascending row order. Empty classes get empty arrays."""
    order = np.argsort(dataset.labels, kind="stable")
    bounds = np.cumsum(dataset.histogram())[:-1]
    return np.split(order, bounds)


# --------------------------------------------------------------------- I/O


def _resolve_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "bin"
    fmt = fmt.lower()
    if fmt not in ("csv", "bin"):
        raise ConfigError(f"unknown format {fmt!r}; expected 'csv' or 'bin'")
    return fmt


def load(path, fmt: str | None = None) -> LabeledEmbeddingSet:
    """Read a labeled embedding set. ``fmt`` defaults to the file extension."""
    path = Path(path)
    fmt = _resolve_format(path, fmt)
    try:
        if fmt == "bin":
            return _load_bin(path.read_bytes())
        return _load_csv(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def save(dataset: LabeledEmbeddingSet, path, fmt: str | None = None) -> None:
    dataset.require_complete()
    path = Path(path)
    fmt = _resolve_format(path, fmt)
    data = to_bytes(dataset) if fmt == "bin" else to_csv(dataset).encode("utf-8")
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def to_bytes(dataset: LabeledEmbeddingSet) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, dataset.n, dataset.dim, dataset.class_count))
    buf.write(dataset.labels.astype("<u4").tobytes())
    buf.write(dataset.features.astype("<f4").tobytes())
    return buf.getvalue()


def _load_bin(raw: bytes) -> LabeledEmbeddingSet:
    if len(raw) < _HEADER.size:
        raise DataError("truncated header")
    magic, n, d, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 4 * n + 4 * n * d
    if len(raw) != expected:
        raise DataError(f"file size {len(raw)} does not match header (expected {expected})")
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=_HEADER.size)
    features = np.frombuffer(raw, dtype="<f4", count=n * d, offset=_HEADER.size + 4 * n)
    return LabeledEmbeddingSet(features.reshape(n, d), labels.astype(np.int64), c)


def to_csv(dataset: LabeledEmbeddingSet) -> str:
    lines = []
    if dataset.n == 0 or dataset.class_count != int(dataset.labels.max()) + 1:
        lines.append(f"# classes={dataset.class_count}")
    lines.append(",".join(["label"] + [f"f{j}" for j in range(dataset.dim)]))
    for label, row in zip(dataset.labels, dataset.features):
        lines.append(",".join([str(int(label))] + [f"{v:.9g}" for v in row]))
    return "\n".join(lines) + "\n"


def _load_csv(text: str) -> LabeledEmbeddingSet:
    declared = None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    start = 0
    if lines and lines[0].startswith("#"):
        key, _, value = lines[0].lstrip("# ").partition("=")
        if key.strip() != "classes":
            raise DataError(f"row 0: unrecognised directive {lines[0]!r}")
        try:
            declared = int(value)
        except ValueError:
            raise DataError(f"row 0: malformed class declaration {lines[0]!r}") from None
        start = 1
    d = None
    if start < len(lines) and lines[start].split(",")[0].strip() == "label":
        header = [h.strip() for h in lines[start].split(",")]
        d = len(header) - 1
        if d < 1 or header[1:] != [f"f{j}" for j in range(d)]:
            raise DataError(f"row {start}: malformed header {lines[start]!r}")
        start += 1

    labels, rows = [], []
    for i in range(start, len(lines)):
        fields = lines[i].split(",")
        if d is None:
            d = len(fields) - 1
        if len(fields) != d + 1:
            raise DataError(f"row {i}: expected {d + 1} fields, found {len(fields)}")
        try:
            label = int(fields[0])
            values = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise DataError(f"row {i}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"row {i}: non-finite feature value")
        if label < 0 or (declared is not None and label >= declared):
            raise DataError(f"row {i}: label {label} out of range")
        labels.append(label)
        rows.append(values)
    if d is None:
        raise DataError("empty file")
    class_count = declared if declared is not None else (max(labels) + 1 if labels else 0)
    features = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    return LabeledEmbeddingSet(features, np.array(labels, dtype=np.int64), max(class_count, 2))


# ------------------------------------------------------- imbalance profiles


@dataclass(frozen=True)
class ImbalanceProfile:
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2 or min(counts) < 1:
            raise ConfigError(f"profile needs >= 2 positive counts, got {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def ratio(self) -> float:
        return self.counts[0] / self.counts[-1]


def exponential_profile(C: int, n_max: int, rho: float) -> ImbalanceProfile:
    """Per-class counts decaying geometrically from ``n_max`` down to ``n_max / rho``.

    ``counts[c] = round(n_max * rho ** (-c / (C - 1)))`` with halves rounded up.
    """
    if C < 2 or n_max < C or rho < 1:
        raise ConfigError(f"need C >= 2, n_max >= C, rho >= 1; got C={C}, n_max={n_max}, rho={rho}")
    counts = [max(1, math.floor(n_max * rho ** (-c / (C - 1)) + 0.5)) for c in range(C)]
    return ImbalanceProfile(tuple(counts))


def subsample_to_profile(dataset: LabeledEmbeddingSet, profile: ImbalanceProfile | Sequence[int],
                         seed: int) -> LabeledEmbeddingSet:
    """Draw ``profile.counts[c]`` rows of each class without replacement.

    Selected rows keep their original relative order.
    """
    counts = profile.counts if isinstance(profile, ImbalanceProfile) else tuple(profile)
    if len(counts) != dataset.class_count:
        raise ConfigError(f"profile has {len(counts)} classes, set has {dataset.class_count}")
    parts = partition_by_class(dataset)
    short = [c for c, (rows, want) in enumerate(zip(parts, counts)) if len(rows) < want]
    if short:
        raise DataError(f"insufficient rows for classes {short}")
    children = np.random.SeedSequence(seed).spawn(dataset.class_count)
    keep = [
        np.random.default_rng(child).choice(rows, size=want, replace=False)
        for child, rows, want in zip(children, parts, counts)
    ]
    return dataset.subset(np.sort(np.concatenate(keep)))


def gaussian_mixture(C: int, d: int, profile: ImbalanceProfile | Sequence[int],
                     mean_radius: float, sigma: float, seed: int) -> LabeledEmbeddingSet:
    """Isotropic Gaussian classes with means drawn uniformly on a hypersphere.

    Rows are grouped by class in ascending class order. Each class draws from
    its own child of ``SeedSequence(seed)`` so classes are independent streams.
    """
    counts = profile.counts if isinstance(profile, ImbalanceProfile) else tuple(int(c) for c in profile)
    if C < 2 or d < 1 or len(counts) != C:
        raise ConfigError(f"need C >= 2, d >= 1 and {C} profile counts")
    if not mean_radius > 0 or not sigma >= 0:
        raise ConfigError(f"need mean_radius > 0 and sigma >= 0, got {mean_radius}, {sigma}")
    children = np.random.SeedSequence(seed).spawn(C + 1)
    means = class_means(C, d, mean_radius, seed)
    blocks = []
    for c in range(C):
        noise = np.random.default_rng(children[c + 1]).standard_normal((counts[c], d))
        blocks.append(means[c] + sigma * noise)
    labels = np.repeat(np.arange(C), counts)
    return LabeledEmbeddingSet(np.vstack(blocks), labels, C)


def class_means(C: int, d: int, mean_radius: float, seed: int) -> np.ndarray:
    """The class means :func:`gaussian_mixture` uses for the same ``(C, d, mean_radius, seed)``."""
    child = np.random.SeedSequence(seed).spawn(C + 1)[0]
    directions = np.random.default_rng(child).standard_normal((C, d))
    return mean_radius * directions / np.linalg.norm(directions, axis=1, keepdims=True)
