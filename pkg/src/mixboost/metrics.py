"""Threshold metrics (g-mean), ROC-AUC, and run aggregation.

Convention: the majority class is "positive", so TPR is majority recall and
TNR is minority recall. g-mean is symmetric in the two, so only reporting
depends on this choice.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else float("nan")

    @property
    def tnr(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else float("nan")


def _minority_truth(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=float)
    if y.ndim == 2:
        if np.any((y != 0) & (y != 1)) or np.any(y.sum(axis=1) != 1):
            raise ValueError("labels must be one-hot")
        return y[:, 1] == 1
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 (majority) or 1 (minority)")
    return y == 1


def confusion(scores, labels, threshold: float = 0.5) -> ConfusionCounts:
    """Tally counts; a row is predicted minority iff its minority score exceeds ``threshold``."""
    s = np.asarray(scores, dtype=float)
    is_min = _minority_truth(labels)
    if len(s) == 0:
        raise ValueError("empty input")
    if len(s) != len(is_min):
        raise ValueError(f"{len(s)} scores but {len(is_min)} labels")
    pred_min = s > threshold
    return ConfusionCounts(
        tp=int(np.sum(~is_min & ~pred_min)),
        fp=int(np.sum(is_min & ~pred_min)),
        tn=int(np.sum(is_min & pred_min)),
        fn=int(np.sum(~is_min & pred_min)),
    )


def gmean(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0 or c.tn + c.fp == 0:
        raise ValueError("g-mean needs both classes present in the evaluated set")
    return math.sqrt(c.tpr * c.tnr)


def gmean_from_rates(tpr: float, tnr: float) -> float:
    return math.sqrt(tpr * tnr)


def roc_auc(scores, labels) -> float:
    """Probability that a random minority row outscores a random majority row (ties count half).

    Computed through midranks: U = R_min - n_min (n_min + 1) / 2. Ranks are
    multiples of 0.5, so U is exact in floating point for any realistic size.
    """
    s = np.asarray(scores, dtype=float)
    is_min = _minority_truth(labels)
    if len(s) != len(is_min):
        raise ValueError(f"{len(s)} scores but {len(is_min)} labels")
    n_min = int(is_min.sum())
    n_maj = len(s) - n_min
    if n_min == 0 or n_maj == 0:
        raise ValueError("ROC-AUC needs both classes present")
    ranks = rankdata(s, method="average")
    u = ranks[is_min].sum() - n_min * (n_min + 1) / 2.0
    return float(u / (n_min * n_maj))


@dataclass(frozen=True)
class RunSummary:
    """Mean and population standard deviation (ddof=0) over repeated runs."""

    values: tuple[float, ...]
    mean: float
    std: float

    @property
    def runs(self) -> int:
        return len(self.values)


def summarize(runs) -> RunSummary:
    v = [float(x) for x in runs]
    if not v:
        raise ValueError("need at least one run")
    # exact rational arithmetic: constant runs give std exactly 0
    return RunSummary(tuple(v), statistics.mean(v), statistics.pstdev(v))
