"""Classical resampling baselines: ROS, RUS, SMOTE, Borderline-SMOTE (B1/B2), ADASYN, SMOTE+Tomek.

All distances are Euclidean on the (normalized) feature matrix. Neighbour
counts are clamped to what the minority class can supply, so the methods stay
usable with only a handful of minority rows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

METHODS = ("ROS", "RUS", "SMOTE", "BorderlineSMOTE_B1", "BorderlineSMOTE_B2", "ADASYN", "SMOTE_Tomek")
MINORITY = np.array([0.0, 1.0])


class FallbackWarning(UserWarning):
    """A method could not run as defined and fell back to a simpler rule."""


@dataclass(frozen=True)
class BaselineSpec:
    """``target_count`` is the number of rows to add (oversamplers) or drop (RUS)."""

    method: str
    target_count: int
    k_neighbors: int = 5
    m_neighbors: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.k_neighbors < 1 or self.m_neighbors < 1:
            raise ValueError("neighbour counts must be >= 1")
        if self.target_count < 0:
            raise ValueError("target_count must be >= 0")


def _check_classes(train: Dataset) -> tuple[np.ndarray, np.ndarray]:
    if not train.is_one_hot:
        raise ValueError("baselines operate on one-hot datasets")
    maj = np.flatnonzero(train.majority_mask)
    mino = np.flatnonzero(train.minority_mask)
    if len(maj) == 0 or len(mino) == 0:
        raise ValueError("both classes must be non-empty")
    return maj, mino


def _nearest(queries: np.ndarray, pool: np.ndarray, k: int, exclude_self: bool = False) -> np.ndarray:
    """Indices into ``pool`` of the k nearest rows per query; ties go to the lower index."""
    d2 = ((queries[:, None, :] - pool[None, :, :]) ** 2).sum(axis=2)
    if exclude_self:
        np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def _add_minority(train: Dataset, rows: np.ndarray) -> Dataset:
    rows = np.asarray(rows, dtype=float).reshape(-1, train.n_features)
    return train.append(rows, np.tile(MINORITY, (len(rows), 1)), augmented=True)


def effective_k(spec: BaselineSpec, n_minority: int) -> int:
    return min(spec.k_neighbors, n_minority - 1)


def ros(train: Dataset, spec: BaselineSpec) -> Dataset:
    _, mino = _check_classes(train)
    if spec.target_count == 0:
        return train
    rng = np.random.default_rng(spec.seed)
    picks = rng.choice(mino, size=spec.target_count, replace=True)
    return _add_minority(train, train.features[picks])


def rus(train: Dataset, spec: BaselineSpec, ratio: float | None = None) -> Dataset:
    """Randomly drop majority rows.

    With ``ratio`` set, keep ``round(ratio * n_minority)`` majority rows
    (ratio 1 balances the classes); otherwise drop ``spec.target_count`` rows.
    """
    maj, mino = _check_classes(train)
    keep_n = len(maj) - spec.target_count if ratio is None else int(round(ratio * len(mino)))
    if keep_n < 1:
        raise ValueError(f"undersampling would leave {keep_n} majority rows")
    if keep_n >= len(maj):
        return train
    rng = np.random.default_rng(spec.seed)
    keep = rng.choice(maj, size=keep_n, replace=False)
    return train.subset(np.sort(np.concatenate([keep, mino])))


def _interpolate(x: np.ndarray, nb: np.ndarray, rng, count: int, seeds, neighbor_of, gap_high=None):
    out = np.empty((count, x.shape[1]))
    for s in range(count):
        i = seeds[s]
        j = neighbor_of(i)
        hi = 1.0 if gap_high is None else gap_high(j)
        out[s] = x[i] + rng.uniform(0.0, hi) * (nb[j] - x[i])
    return out


def _smote_rows(x_min: np.ndarray, k: int, count: int, rng, seeds=None) -> np.ndarray:
    nn = _nearest(x_min, x_min, k, exclude_self=True)
    if seeds is None:
        seeds = rng.integers(0, len(x_min), size=count)
    return _interpolate(x_min, x_min, rng, count, seeds, lambda i: nn[i, rng.integers(0, k)])


def smote(train: Dataset, spec: BaselineSpec) -> Dataset:
    """Each synthetic row is ``x + u * (neighbour - x)`` with ``u ~ U(0, 1)``."""
    _, mino = _check_classes(train)
    if spec.target_count == 0:
        return train
    if len(mino) < 2:
        raise ValueError("SMOTE needs at least 2 minority instances")
    rng = np.random.default_rng(spec.seed)
    rows = _smote_rows(train.features[mino], effective_k(spec, len(mino)), spec.target_count, rng)
    return _add_minority(train, rows)


def danger_set(train: Dataset, spec: BaselineSpec) -> np.ndarray:
    """Minority rows whose m-neighbourhood is at least half (but not entirely) majority."""
    _, mino = _check_classes(train)
    m = min(spec.m_neighbors, len(train) - 1)
    nn = _nearest(train.features[mino], train.features, m + 1)
    maj_counts = np.empty(len(mino), dtype=int)
    for r, i in enumerate(mino):
        neigh = [j for j in nn[r] if j != i][:m]
        maj_counts[r] = int(train.majority_mask[neigh].sum())
    return mino[(maj_counts * 2 >= m) & (maj_counts < m)]


def borderline_smote(train: Dataset, spec: BaselineSpec, variant: int = 1) -> Dataset:
    """Borderline-SMOTE: seeds restricted to the DANGER set.

    B1 interpolates towards minority neighbours only. B2 also uses neighbours
    of either class, with the gap capped at 0.5 when the neighbour is majority.
    An empty DANGER set falls back to plain SMOTE with a ``FallbackWarning``.
    """
    if variant not in (1, 2):
        raise ValueError("variant must be 1 or 2")
    _, mino = _check_classes(train)
    if spec.target_count == 0:
        return train
    if len(mino) < 2:
        raise ValueError("Borderline-SMOTE needs at least 2 minority instances")
    danger = danger_set(train, spec)
    if len(danger) == 0:
        warnings.warn("empty DANGER set; falling back to plain SMOTE", FallbackWarning, stacklevel=2)
        return smote(train, spec)
    rng = np.random.default_rng(spec.seed)
    k = effective_k(spec, len(mino))
    pos = {row: p for p, row in enumerate(mino)}
    seeds = np.array([pos[d] for d in rng.choice(danger, size=spec.target_count)])
    x_min = train.features[mino]
    if variant == 1:
        return _add_minority(train, _smote_rows(x_min, k, spec.target_count, rng, seeds))

    x_all = train.features
    nn = _nearest(x_min, x_all, k + 1)
    nn = np.array([[j for j in nn[r] if j != mino[r]][:k] for r in range(len(mino))])
    rows = _interpolate(
        x_min, x_all, rng, spec.target_count, seeds,
        lambda i: nn[i, rng.integers(0, k)],
        lambda j: 1.0 if train.minority_mask[j] else 0.5,
    )
    return _add_minority(train, rows)


def adasyn_weights(train: Dataset, spec: BaselineSpec) -> np.ndarray:
    """Normalized share of synthetics per minority row, proportional to local majority density."""
    _, mino = _check_classes(train)
    k = min(spec.k_neighbors, len(train) - 1)
    nn = _nearest(train.features[mino], train.features, k + 1)
    ratio = np.empty(len(mino))
    for r, i in enumerate(mino):
        neigh = [j for j in nn[r] if j != i][:k]
        ratio[r] = train.majority_mask[neigh].sum() / k
    if ratio.sum() == 0:
        warnings.warn("no majority rows near any minority row; ADASYN weights are uniform",
                      FallbackWarning, stacklevel=2)
        return np.full(len(mino), 1.0 / len(mino))
    return ratio / ratio.sum()


def _allocate(weights: np.ndarray, total: int) -> np.ndarray:
    raw = weights * total
    counts = np.floor(raw).astype(int)
    short = total - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def adasyn(train: Dataset, spec: BaselineSpec) -> Dataset:
    _, mino = _check_classes(train)
    if spec.target_count == 0:
        return train
    if len(mino) < 2:
        raise ValueError("ADASYN needs at least 2 minority instances")
    counts = _allocate(adasyn_weights(train, spec), spec.target_count)
    rng = np.random.default_rng(spec.seed)
    seeds = np.repeat(np.arange(len(mino)), counts)
    rows = _smote_rows(train.features[mino], effective_k(spec, len(mino)), spec.target_count, rng, seeds)
    return _add_minority(train, rows)


def tomek_links(data: Dataset) -> list[tuple[int, int]]:
    """Pairs of opposite-class rows that are each other's nearest neighbour."""
    if len(data) < 2:
        return []
    nn = _nearest(data.features, data.features, 1, exclude_self=True)[:, 0]
    y = data.hard_labels
    return [(i, int(j)) for i, j in enumerate(nn) if i < j and nn[j] == i and y[i] != y[j]]


def smote_tomek(train: Dataset, spec: BaselineSpec) -> Dataset:
    """SMOTE followed by deleting both members of every Tomek link."""
    if spec.target_count == 0:
        _check_classes(train)
        return train
    data = smote(train, spec)
    drop = {i for pair in tomek_links(data) for i in pair}
    if not drop:
        return data
    return data.subset(np.array([i for i in range(len(data)) if i not in drop]))


def resample(train: Dataset, spec: BaselineSpec) -> Dataset:
    if spec.method == "ROS":
        return ros(train, spec)
    if spec.method == "RUS":
        return rus(train, spec)
    if spec.method == "SMOTE":
        return smote(train, spec)
    if spec.method == "BorderlineSMOTE_B1":
        return borderline_smote(train, spec, 1)
    if spec.method == "BorderlineSMOTE_B2":
        return borderline_smote(train, spec, 2)
    if spec.method == "ADASYN":
        return adasyn(train, spec)
    return smote_tomek(train, spec)
