"""Iterative hybrid oversampling: candidate selection, mixing, and the retrain loop.

One iteration picks (majority, minority) pairs from the original training rows,
either uniformly or weighted by the current model's prediction entropy, blends
each pair with a random ratio ``lam`` and appends the hybrids (with blended soft
labels) to the augmented set, then the classifier is retrained from scratch.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .classifier import MLP, MlpConfig, TrainingError, mlp_fit
from .dataset import Dataset

log = logging.getLogger(__name__)

RATIO_EPS = 1e-9

Strategy = Literal["R", "EW"]
LabelMode = Literal["soft", "one_hot"]
LambdaDist = Literal["beta", "uniform"]


@dataclass(frozen=True)
class MixConfig:
    """Augmentation settings.

    ``n_synthetic=None`` means "as many hybrids as there are training rows".
    Each of the ``iterations`` rounds produces ``1/iterations`` of the total,
    with the rounding remainder pushed to later rounds.
    """

    iterations: int = 5
    n_synthetic: int | None = None
    alpha: float = 0.5
    strategy: Strategy = "EW"
    label_mode: LabelMode = "soft"
    lambda_dist: LambdaDist = "beta"
    warm_start: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.n_synthetic is not None and self.n_synthetic < 0:
            raise ValueError("n_synthetic must be >= 0")
        if self.strategy not in ("R", "EW"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.label_mode not in ("soft", "one_hot"):
            raise ValueError(f"unknown label_mode {self.label_mode!r}")
        if self.lambda_dist not in ("beta", "uniform"):
            raise ValueError(f"unknown lambda_dist {self.lambda_dist!r}")

    @property
    def per_iteration_fraction(self) -> float:
        return 1.0 / self.iterations


def iteration_schedule(n_synthetic: int, iterations: int) -> list[int]:
    """Hybrids per round: ceil of what remains over rounds left, e.g. 7/5 -> 2,2,1,1,1."""
    out = []
    remaining = n_synthetic
    for left in range(iterations, 0, -1):
        c = -(-remaining // left)
        out.append(c)
        remaining -= c
    return out


class Categorical:
    """Cumulative-weight sampler over a fixed index set."""

    def __init__(self, indices, weights):
        self.indices = np.asarray(indices, dtype=int)
        w = np.asarray(weights, dtype=float)
        self.probs = w / w.sum()
        self._cdf = np.cumsum(self.probs)

    def draw(self, rng: np.random.Generator) -> int:
        u = rng.random() * self._cdf[-1]
        j = int(np.searchsorted(self._cdf, u, side="right"))
        return int(self.indices[min(j, len(self.indices) - 1)])


@dataclass(frozen=True, eq=False)
class SelectionProbabilities:
    majority: Categorical
    minority: Categorical

    @classmethod
    def uniform(cls, train: Dataset) -> SelectionProbabilities:
        maj = np.flatnonzero(train.majority_mask)
        mino = np.flatnonzero(train.minority_mask)
        if len(maj) == 0 or len(mino) == 0:
            raise ValueError("both classes need at least one original instance")
        return cls(Categorical(maj, np.ones(len(maj))), Categorical(mino, np.ones(len(mino))))


def entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy in nats along the last axis, with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def _ratios(e: np.ndarray) -> tuple[np.ndarray, bool]:
    total = e.sum()
    if total > 0:
        return e / total, False
    return np.full(len(e), 1.0 / len(e)), True


def _inverse(r: np.ndarray) -> np.ndarray:
    w = r.max() - r + RATIO_EPS
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class EntropyTable:
    """Prediction entropies of the original rows and per-class entropy ratios.

    ``majority_rows``/``minority_rows`` are row indices into the training set;
    the ratio arrays are aligned with them. A ``*_degenerate`` flag means the
    class had zero total entropy and its ratios were replaced by uniform weights.
    """

    entropies: np.ndarray
    majority_rows: np.ndarray
    minority_rows: np.ndarray
    majority_ratios: np.ndarray
    minority_ratios: np.ndarray
    majority_degenerate: bool = False
    minority_degenerate: bool = False
    _samplers: dict = field(default_factory=dict, repr=False)

    @property
    def majority_sum(self) -> float:
        return float(self.entropies[self.majority_rows].sum())

    @property
    def minority_sum(self) -> float:
        return float(self.entropies[self.minority_rows].sum())

    def high(self, cls: int) -> Categorical:
        return self._sampler(("high", cls))

    def low(self, cls: int) -> Categorical:
        return self._sampler(("low", cls))

    def _sampler(self, key) -> Categorical:
        if key not in self._samplers:
            side, cls = key
            rows = self.majority_rows if cls == 0 else self.minority_rows
            r = self.majority_ratios if cls == 0 else self.minority_ratios
            self._samplers[key] = Categorical(rows, r if side == "high" else _inverse(r))
        return self._samplers[key]


def entropy_table_from_probs(probs: np.ndarray, train: Dataset) -> EntropyTable:
    maj = np.flatnonzero(train.majority_mask)
    mino = np.flatnonzero(train.minority_mask)
    if len(maj) == 0 or len(mino) == 0:
        raise ValueError("both classes need at least one original instance")
    e = entropy(probs)
    maj_r, maj_deg = _ratios(e[maj])
    min_r, min_deg = _ratios(e[mino])
    for name, deg in (("majority", maj_deg), ("minority", min_deg)):
        if deg:
            log.warning("all %s entropies are zero; using uniform selection for that class", name)
    return EntropyTable(e, maj, mino, maj_r, min_r, maj_deg, min_deg)


def compute_entropy_table(model, train: Dataset) -> EntropyTable:
    """Entropy table for the one-hot rows of ``train`` under ``model``.

    Soft-labelled (synthetic) rows are never selection candidates: they
    appear in neither class index set.
    """
    return entropy_table_from_probs(model.predict_proba(train.features), train)


def r_select_pair(train: Dataset | SelectionProbabilities, rng: np.random.Generator) -> tuple[int, int]:
    sel = train if isinstance(train, SelectionProbabilities) else SelectionProbabilities.uniform(train)
    return sel.majority.draw(rng), sel.minority.draw(rng)


def ew_select_pair(table: EntropyTable, rng: np.random.Generator) -> tuple[int, int]:
    """Low-high pair: one side weighted by entropy ratio, the other by its inverse.

    A fair coin decides whether the majority or the minority candidate takes
    the high-entropy side.
    """
    if rng.random() < 0.5:
        return table.high(0).draw(rng), table.low(1).draw(rng)
    return table.low(0).draw(rng), table.high(1).draw(rng)


def ew_marginals(table: EntropyTable) -> tuple[np.ndarray, np.ndarray]:
    """Analytic per-row selection probabilities of ``ew_select_pair``."""
    return (
        0.5 * table.high(0).probs + 0.5 * table.low(0).probs,
        0.5 * table.low(1).probs + 0.5 * table.high(1).probs,
    )


def sample_lambda(config: MixConfig, rng: np.random.Generator) -> float:
    if config.lambda_dist == "uniform":
        return float(rng.random())
    while True:
        g0 = rng.gamma(config.alpha)
        g1 = rng.gamma(config.alpha)
        if g0 + g1 > 0:
            return float(g0 / (g0 + g1))


@dataclass(frozen=True, eq=False)
class HybridInstance:
    features: np.ndarray
    label: np.ndarray
    lambda_used: float
    majority_index: int = -1
    minority_index: int = -1


def mix_pair(x0, x1, lam: float, label_mode: LabelMode = "soft", sources=(-1, -1)) -> HybridInstance:
    """Blend a majority row ``x0`` with a minority row ``x1``: ``lam*x0 + (1-lam)*x1``."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x0.shape != x1.shape:
        raise ValueError(f"feature width mismatch: {x0.shape} vs {x1.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    mixed = lam * x0 + (1.0 - lam) * x1
    # rounding can leave the segment by one ulp when x0 ~ x1
    mixed = np.clip(mixed, np.minimum(x0, x1), np.maximum(x0, x1))
    if label_mode == "soft":
        label = np.array([lam, 1.0 - lam])
    elif label_mode == "one_hot":
        label = np.array([1.0, 0.0]) if lam > 0.5 else np.array([0.0, 1.0])
    else:
        raise ValueError(f"unknown label_mode {label_mode!r}")
    return HybridInstance(mixed, label, float(lam), int(sources[0]), int(sources[1]))


def run_iteration(
    train_orig: Dataset,
    augmented: Dataset,
    model,
    config: MixConfig,
    rng: np.random.Generator,
    count: int,
    table: EntropyTable | None = None,
) -> list[HybridInstance]:
    """Generate ``count`` hybrids from pairs of original training rows.

    ``augmented`` is accepted for symmetry with the loop but candidates are
    drawn only from ``train_orig``.
    """
    if config.strategy == "EW":
        if table is None:
            table = compute_entropy_table(model, train_orig)
        select = lambda: ew_select_pair(table, rng)  # noqa: E731
    else:
        uniform = SelectionProbabilities.uniform(train_orig)
        select = lambda: r_select_pair(uniform, rng)  # noqa: E731
    x = train_orig.features
    out = []
    for _ in range(count):
        i, j = select()
        lam = sample_lambda(config, rng)
        out.append(mix_pair(x[i], x[j], lam, config.label_mode, (i, j)))
    return out


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    hybrids_added: int
    train_loss: float
    mean_entropy_majority: float
    mean_entropy_minority: float


TRACE_FIELDS = ["iteration", "hybrids_added", "train_loss", "mean_entropy_majority", "mean_entropy_minority"]


def write_trace_csv(trace: list[IterationTrace], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for t in trace:
            w.writerow([t.iteration, t.hybrids_added, repr(t.train_loss),
                        repr(t.mean_entropy_majority), repr(t.mean_entropy_minority)])


def _append(data: Dataset, hybrids: list[HybridInstance]) -> Dataset:
    if not hybrids:
        return data
    return data.append(np.stack([h.features for h in hybrids]), np.stack([h.label for h in hybrids]))


def _fit(mlp_config: MlpConfig, data: Dataset, seed: int, init, stage: str) -> MLP:
    cfg = MlpConfig(mlp_config.hidden_layers, mlp_config.learning_rate, mlp_config.batch_size,
                    mlp_config.epochs, seed)
    try:
        return mlp_fit(cfg, data, init=init)
    except (TrainingError, ValueError) as exc:
        raise TrainingError(f"{stage}: {exc}") from exc


def run(
    train_orig: Dataset,
    config: MixConfig,
    classifier_config: MlpConfig | None = None,
) -> tuple[Dataset, MLP, list[IterationTrace]]:
    """Full augment-and-retrain loop.

    Returns the final augmented dataset, the model trained on it, and one
    trace entry per iteration (iteration 0 is the initial fit on the original data).
    """
    if train_orig.majority_count < 1 or train_orig.minority_count < 1:
        raise ValueError("training set needs at least one instance of each class")
    if not train_orig.is_one_hot:
        raise ValueError("train_orig must contain only original (one-hot) rows")
    mlp_config = classifier_config or MlpConfig()
    n_syn = len(train_orig) if config.n_synthetic is None else config.n_synthetic
    rng = np.random.default_rng(config.seed)

    model = _fit(mlp_config, train_orig, mlp_config.seed, None, "initial fit")
    augmented = train_orig
    trace = []
    table = compute_entropy_table(model, train_orig)
    trace.append(IterationTrace(0, 0, model.loss_history[-1],
                                float(table.entropies[table.majority_rows].mean()),
                                float(table.entropies[table.minority_rows].mean())))
    for it, count in enumerate(iteration_schedule(n_syn, config.iterations), start=1):
        hybrids = run_iteration(train_orig, augmented, model, config, rng, count, table=table)
        augmented = _append(augmented, hybrids)
        init = model if config.warm_start else None
        model = _fit(mlp_config, augmented, mlp_config.seed + it, init, f"iteration {it}")
        table = compute_entropy_table(model, train_orig)
        trace.append(IterationTrace(it, len(hybrids), model.loss_history[-1],
                                    float(table.entropies[table.majority_rows].mean()),
                                    float(table.entropies[table.minority_rows].mean())))
    return augmented, model, trace
