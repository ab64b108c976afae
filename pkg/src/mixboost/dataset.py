"""Tabular ingestion, min-max normalization, stratified split and minority down-sampling.

Class index 0 is always the majority class and index 1 the minority class.
Labels are stored as ``(n, 2)`` probability vectors so that hybrid (soft-labelled)
rows produced by augmentation live in the same container as the original data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LABEL_SUM_TOL = 1e-9


class DataError(ValueError):
    """Raised for malformed input files or impossible split/sampling requests."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus per-row label distributions over (majority, minority).

    Parameters
    ----------
    features : array of shape (n, m)
    labels : array of shape (n, 2)
        Each row is a probability vector; original rows are one-hot.
    augmented : bool
        True once synthetic rows with soft labels may be present.
    classes : tuple of str
        Raw label values for (majority, minority), kept for reporting.
    """

    features: np.ndarray
    labels: np.ndarray
    augmented: bool = False
    classes: tuple[str, str] = ("0", "1")

    def __post_init__(self):
        x = _frozen(self.features)
        y = _frozen(self.labels)
        if x.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {x.shape}")
        if y.shape != (x.shape[0], 2):
            raise DataError(f"labels must have shape ({x.shape[0]}, 2), got {y.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain missing or non-finite values")
        if np.any(y < 0) or np.any(np.abs(y.sum(axis=1) - 1.0) > LABEL_SUM_TOL):
            raise DataError("every label must be a nonnegative 2-vector summing to 1")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_hard_labels(cls, features, y, classes=("0", "1")) -> Dataset:
        """Build a dataset from integer labels (0 = majority, 1 = minority)."""
        y = np.asarray(y, dtype=int)
        if np.any((y != 0) & (y != 1)):
            raise DataError("hard labels must be 0 or 1")
        return cls(np.asarray(features, dtype=float), np.eye(2)[y], classes=classes)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def majority_mask(self) -> np.ndarray:
        return (self.labels[:, 0] == 1.0) & (self.labels[:, 1] == 0.0)

    @property
    def minority_mask(self) -> np.ndarray:
        return (self.labels[:, 0] == 0.0) & (self.labels[:, 1] == 1.0)

    @property
    def majority_count(self) -> int:
        return int(self.majority_mask.sum())

    @property
    def minority_count(self) -> int:
        return int(self.minority_mask.sum())

    @property
    def is_one_hot(self) -> bool:
        return self.majority_count + self.minority_count == len(self)

    @property
    def hard_labels(self) -> np.ndarray:
        """Index of the larger label entry; ties resolve to the majority class."""
        return (self.labels[:, 1] > self.labels[:, 0]).astype(int)

    def subset(self, rows) -> Dataset:
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.labels[rows], self.augmented, self.classes)

    def append(self, features, labels, augmented: bool = True) -> Dataset:
        features = np.asarray(features, dtype=float).reshape(-1, self.n_features)
        labels = np.asarray(labels, dtype=float).reshape(-1, 2)
        return Dataset(
            np.vstack([self.features, features]),
            np.vstack([self.labels, labels]),
            self.augmented or augmented,
            self.classes,
        )


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    train_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise DataError(f"train_fraction must be in (0, 1], got {self.train_fraction}")


@dataclass(frozen=True)
class ImbalanceSpec:
    minority_count: int
    seed: int = 0

    def __post_init__(self):
        if self.minority_count < 1:
            raise DataError(f"minority_count must be positive, got {self.minority_count}")


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-feature min-max scaler. Constant features map to ``x - min`` (0 on the fit data)."""

    minimum: np.ndarray
    maximum: np.ndarray
    scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "minimum", _frozen(self.minimum))
        object.__setattr__(self, "maximum", _frozen(self.maximum))
        span = self.maximum - self.minimum
        object.__setattr__(self, "scale", _frozen(np.where(span > 0, span, 1.0)))

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.minimum) / self.scale


def load_csv(
    path,
    label_column: int | str = -1,
    minority_label: str | None = None,
    header: bool = True,
) -> Dataset:
    """Read a comma-separated file with exactly two label values.

    The class with fewer rows becomes the minority (index 1) unless
    ``minority_label`` names it explicitly. Equal counts: the lexicographically
    larger raw label is taken as minority.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    names = None
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")

    width = len(rows[0])
    if isinstance(label_column, str):
        if names is None:
            raise DataError("label_column given by name requires a header row")
        if label_column not in names:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = names.index(label_column)
    else:
        label_idx = label_column % width

    feats, raw = [], []
    first_line = 2 if header else 1
    for lineno, row in enumerate(rows, start=first_line):
        if len(row) != width:
            raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        values = []
        for col, cell in enumerate(row):
            if col == label_idx:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {lineno}, column {col + 1}: cannot parse {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {lineno}, column {col + 1}: non-finite value {cell!r}")
            values.append(v)
        feats.append(values)
        raw.append(row[label_idx].strip())

    values, counts = np.unique(np.array(raw), return_counts=True)
    if len(values) != 2:
        raise DataError(f"{path}: labels are not binary, found {len(values)} distinct values")
    if minority_label is None:
        # values are sorted, so on a tie argmax picks the smaller label as majority
        majority = values[int(np.argmax(counts))]
    else:
        if minority_label not in values:
            raise DataError(f"{path}: minority label {minority_label!r} not present")
        majority = values[0] if values[1] == minority_label else values[1]
    minority = values[0] if values[1] == majority else values[1]
    y = np.array([0 if r == majority else 1 for r in raw])
    return Dataset.from_hard_labels(np.array(feats, dtype=float), y, classes=(str(majority), str(minority)))


def fit_normalizer(train: Dataset) -> Normalizer:
    if len(train) == 0:
        raise DataError("cannot fit a normalizer on an empty dataset")
    return Normalizer(train.features.min(axis=0), train.features.max(axis=0))


def apply_normalizer(norm: Normalizer, data: Dataset) -> Dataset:
    return Dataset(norm.transform(data.features), data.labels, data.augmented, data.classes)


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified random split; rows keep their original relative order."""
    if len(data) < 4:
        raise DataError(f"need at least 4 rows to split, got {len(data)}")
    rng = np.random.default_rng(spec.seed)
    train_rows = []
    for cls, mask in enumerate((data.majority_mask, data.minority_mask)):
        idx = np.flatnonzero(mask)
        n_c = len(idx)
        if n_c == 0:
            raise DataError(f"class {cls} has no instances")
        n_train = int(math.floor(n_c * spec.train_fraction + 0.5))
        if spec.train_fraction < 1.0:
            if n_c < 2:
                raise DataError(f"class {cls} has {n_c} instance; cannot place it in both halves")
            n_train = min(max(n_train, 1), n_c - 1)
        train_rows.append(rng.permutation(idx)[:n_train])
    train_rows = np.sort(np.concatenate(train_rows))
    test_rows = np.setdiff1d(np.arange(len(data)), train_rows)
    # soft-labelled rows (if any) are neither class; they go to train unchanged
    other = np.flatnonzero(~(data.majority_mask | data.minority_mask))
    if len(other):
        train_rows = np.sort(np.concatenate([train_rows, other]))
        test_rows = np.setdiff1d(test_rows, other)
    return data.subset(train_rows), data.subset(test_rows)


def downsample_minority(train: Dataset, spec: ImbalanceSpec) -> Dataset:
    minority = np.flatnonzero(train.minority_mask)
    if spec.minority_count > len(minority):
        raise DataError(
            f"requested {spec.minority_count} minority instances but only {len(minority)} available"
        )
    rng = np.random.default_rng(spec.seed)
    keep = rng.choice(minority, size=spec.minority_count, replace=False)
    rows = np.sort(np.concatenate([np.flatnonzero(~train.minority_mask), keep]))
    return train.subset(rows)
