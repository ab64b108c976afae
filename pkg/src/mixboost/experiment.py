"""Repeated-run experiment protocol, result persistence, method comparison and sweeps.

One run: stratified half split -> minority down-sampling -> min-max scaling fit
on the reduced training set -> augmentation -> classifier fit -> test metrics.
Run ``i`` uses seed ``master_seed + i``; everything downstream is derived from it.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines
from .classifier import KnnModel, MlpConfig, mlp_fit
from .core import MixConfig, run as mixboost_run
from .dataset import (
    Dataset,
    ImbalanceSpec,
    SplitSpec,
    apply_normalizer,
    downsample_minority,
    fit_normalizer,
    load_csv,
    split,
)
from .metrics import RunSummary, confusion, gmean, roc_auc, summarize
from .stats import DirichletConfig, SignedTestResult, bayesian_signed_test, simplex_points, write_simplex_csv

log = logging.getLogger(__name__)

METHODS = ("none", "mixboost", "ros", "rus", "smote", "b1", "b2", "adasyn", "smote_tomek")
BASELINE_NAMES = {
    "ros": "ROS",
    "rus": "RUS",
    "smote": "SMOTE",
    "b1": "BorderlineSMOTE_B1",
    "b2": "BorderlineSMOTE_B2",
    "adasyn": "ADASYN",
    "smote_tomek": "SMOTE_Tomek",
}
METRICS = ("gmean", "roc_auc")
RESULT_FIELDS = ["dataset", "method", "strategy", "classifier", "min_count", "run", "seed", "gmean", "roc_auc"]
SUMMARY_FIELDS = ["dataset", "method", "strategy", "classifier", "min_count", "metric", "runs", "mean", "std_population"]


class ExperimentError(RuntimeError):
    def __init__(self, message: str, stage: str = ""):
        super().__init__(message)
        self.stage = stage


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    method: str = "mixboost"
    min_count: int = 4
    runs: int = 30
    synthetic_multiple: float = 1.0
    mix: MixConfig = field(default_factory=MixConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    classifier: str = "mlp"
    knn_k: int = 5
    k_neighbors: int = 5
    seed: int = 0
    train_fraction: float = 0.5
    label_column: str | int = -1
    minority_label: str | None = None
    header: bool = True
    name: str | None = None
    fail_fast: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.classifier not in ("mlp", "knn"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.method == "mixboost" and self.classifier != "mlp":
            raise ValueError("mixboost trains on soft labels and requires the mlp classifier")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.synthetic_multiple < 0:
            raise ValueError("synthetic_multiple must be >= 0")

    @property
    def dataset_key(self) -> str:
        return self.name or Path(self.dataset).stem

    @property
    def strategy_label(self) -> str:
        return self.mix.strategy if self.method == "mixboost" else ""

    def run_seed(self, index: int) -> int:
        return self.seed + index

    def dump(self) -> str:
        """key=value lines, nested configs flattened as ``mix.alpha=0.5``."""
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                for g in dataclasses.fields(v):
                    lines.append(f"{f.name}.{g.name}={getattr(v, g.name)}")
            else:
                lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ResultRecord:
    dataset: str
    method: str
    strategy: str
    classifier: str
    min_count: int
    run: int
    seed: int
    gmean: float
    roc_auc: float
    wall_time: float = field(default=float("nan"), compare=False)

    def row(self) -> list:
        return [self.dataset, self.method, self.strategy, self.classifier, self.min_count,
                self.run, self.seed, repr(self.gmean), repr(self.roc_auc)]


@dataclass(frozen=True)
class RunFailure:
    run: int
    seed: int
    stage: str
    message: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[ResultRecord]
    failures: list[RunFailure]

    def summary(self, metric: str) -> RunSummary:
        return summarize(getattr(r, metric) for r in self.records)

    @property
    def ok(self) -> bool:
        return not self.failures


def _derive_seeds(seed: int) -> tuple[int, int, int, int]:
    return tuple(int(s) for s in np.random.SeedSequence(seed).generate_state(4))


def _augment(config: ExperimentConfig, train: Dataset, aug_seed: int, mlp_cfg: MlpConfig):
    """Return (augmented training set, already-trained model or None)."""
    n_syn = int(round(config.synthetic_multiple * len(train)))
    if config.method == "none":
        return train, None
    if config.method == "mixboost":
        mix = replace(config.mix, n_synthetic=n_syn, seed=aug_seed)
        augmented, model, _ = mixboost_run(train, mix, mlp_cfg)
        return augmented, model
    spec = baselines.BaselineSpec(BASELINE_NAMES[config.method], n_syn, config.k_neighbors, seed=aug_seed)
    if config.method == "rus":
        return baselines.rus(train, spec, ratio=1.0), None
    return baselines.resample(train, spec), None


def run_single(config: ExperimentConfig, data: Dataset, index: int) -> ResultRecord:
    start = time.perf_counter()
    seed = config.run_seed(index)
    split_seed, down_seed, aug_seed, mlp_seed = _derive_seeds(seed)
    stage = "split"
    try:
        train, test = split(data, SplitSpec(split_seed, config.train_fraction))
        stage = "downsample"
        train = downsample_minority(train, ImbalanceSpec(config.min_count, down_seed))
        norm = fit_normalizer(train)
        train, test = apply_normalizer(norm, train), apply_normalizer(norm, test)
        stage = "augment"
        mlp_cfg = replace(config.mlp, seed=mlp_seed)
        augmented, model = _augment(config, train, aug_seed, mlp_cfg)
        stage = "fit"
        if model is None:
            model = mlp_fit(mlp_cfg, augmented) if config.classifier == "mlp" else KnnModel(augmented, config.knn_k)
        stage = "evaluate"
        scores = model.predict_proba(test.features)[:, 1]
        g = gmean(confusion(scores, test.labels))
        auc = roc_auc(scores, test.labels)
    except Exception as exc:
        raise ExperimentError(f"run={index} seed={seed} stage={stage}: {type(exc).__name__}: {exc}", stage) from exc
    return ResultRecord(config.dataset_key, config.method, config.strategy_label, config.classifier,
                        config.min_count, index, seed, g, auc, time.perf_counter() - start)


def _run_one(args):
    config, data, index = args
    try:
        return run_single(config, data, index)
    except ExperimentError as exc:
        return RunFailure(index, config.run_seed(index), exc.stage, str(exc))


def run_experiment(config: ExperimentConfig, out_dir=None, data: Dataset | None = None) -> ExperimentResult:
    """Execute ``config.runs`` runs; results are ordered by run index regardless of scheduling."""
    if data is None:
        data = load_csv(config.dataset, config.label_column, config.minority_label, config.header)
    jobs = [(config, data, i) for i in range(config.runs)]
    if config.jobs > 1 and not config.fail_fast:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = []
        for job in jobs:
            out = _run_one(job)
            outcomes.append(out)
            if isinstance(out, RunFailure):
                log.error("%s", out.message)
                if config.fail_fast:
                    break
    records = [o for o in outcomes if isinstance(o, ResultRecord)]
    failures = [o for o in outcomes if isinstance(o, RunFailure)]
    result = ExperimentResult(config, records, failures)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def summary_rows(result: ExperimentResult) -> list[list]:
    cfg = result.config
    rows = []
    if not result.records:
        return rows
    for metric in METRICS:
        s = result.summary(metric)
        rows.append([cfg.dataset_key, cfg.method, cfg.strategy_label, cfg.classifier, cfg.min_count,
                     metric, s.runs, repr(s.mean), repr(s.std)])
    return rows


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(result: ExperimentResult, out_dir) -> None:
    """results.csv and summary.csv are deterministic; wall times go to timings.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", RESULT_FIELDS, (r.row() for r in result.records))
    _write_csv(out / "summary.csv", SUMMARY_FIELDS, summary_rows(result))
    _write_csv(out / "timings.csv", ["run", "wall_time_s"],
               ([r.run, f"{r.wall_time:.6f}"] for r in result.records))
    (out / "config.txt").write_text(result.config.dump())
    if result.failures:
        _write_csv(out / "errors.csv", ["run", "seed", "stage", "message"],
                   ([f.run, f.seed, f.stage, f.message] for f in result.failures))


def read_results(path) -> list[ResultRecord]:
    with open(path, newline="") as fh:
        return [
            ResultRecord(r["dataset"], r["method"], r["strategy"], r["classifier"], int(r["min_count"]),
                         int(r["run"]), int(r["seed"]), float(r["gmean"]), float(r["roc_auc"]))
            for r in csv.DictReader(fh)
        ]


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["min_count"] = int(r["min_count"])
        r["runs"] = int(r["runs"])
        r["mean"] = float(r["mean"])
        r["std_population"] = float(r["std_population"])
    return rows


def _per_dataset(rows: list[dict], metric: str, aggregate: str | None, side: str) -> dict[str, float]:
    grouped: dict[str, list[float]] = {}
    for r in rows:
        if r["metric"] == metric:
            grouped.setdefault(r["dataset"], []).append(r["mean"])
    out = {}
    for key, vals in grouped.items():
        if len(vals) > 1 and aggregate != "max":
            raise ExperimentError(f"side {side}: dataset {key!r} has {len(vals)} rows; pass aggregate='max'")
        out[key] = max(vals)
    return out


def compare(
    summaries_a,
    summaries_b,
    config: DirichletConfig | None = None,
    metric: str = "gmean",
    aggregate: str | None = None,
    attribution: str = "max",
    out_dir=None,
) -> tuple[SignedTestResult, np.ndarray, dict[str, float]]:
    """Bayesian signed test on per-dataset mean differences (B - A).

    ``summaries_a``/``summaries_b`` are summary CSV paths (or lists of them).
    With ``aggregate='max'`` several rows per dataset (e.g. different
    classifiers or baselines) collapse to their best mean.
    """
    config = config or DirichletConfig()
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")

    def load(paths):
        paths = [paths] if isinstance(paths, (str, Path)) else list(paths)
        return [row for p in paths for row in read_summary(p)]

    a = _per_dataset(load(summaries_a), metric, aggregate, "A")
    b = _per_dataset(load(summaries_b), metric, aggregate, "B")
    if set(a) != set(b):
        missing_b = sorted(set(a) - set(b))
        missing_a = sorted(set(b) - set(a))
        raise ExperimentError(f"dataset keys differ: missing in B {missing_b}, missing in A {missing_a}")
    keys = sorted(a)
    diffs = {k: b[k] - a[k] for k in keys}
    d = np.array([diffs[k] for k in keys])
    result = bayesian_signed_test(d, config, attribution=attribution)
    points = simplex_points(d, config)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_simplex_csv(points, out / "simplex.csv")
        _write_csv(out / "differences.csv", ["dataset", "difference_b_minus_a"],
                   ([k, repr(diffs[k])] for k in keys))
        (out / "signed_test.txt").write_text(
            f"rope_width={config.rope_width}  # configurable; compare results only at equal widths\n"
            f"metric={metric}\nattribution={attribution}\nprior_strength={config.prior_strength}\n"
            f"prior_point={config.prior_point}\nposterior_samples={config.posterior_samples}\n"
            f"p_left={result.p_left!r}\np_rope={result.p_rope!r}\np_right={result.p_right!r}\n"
        )
    return result, points, diffs


SWEEP_FIELDS = ["axis", "value", "runs", "gmean_mean", "gmean_std_population", "roc_auc_mean", "roc_auc_std_population"]


def sweep(config: ExperimentConfig, axis: str, values, out_dir=None) -> list[list]:
    """Re-run the experiment for each axis value; one summary row per value.

    ``axis='min_count'`` takes integers, ``axis='n_syn'`` takes multiples of the
    training-set size.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one axis value")
    if axis not in ("min_count", "n_syn"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    data = load_csv(config.dataset, config.label_column, config.minority_label, config.header)
    rows = []
    for v in values:
        if axis == "min_count":
            cfg = replace(config, min_count=int(v))
        else:
            cfg = replace(config, synthetic_multiple=float(v))
        sub = None if out_dir is None else Path(out_dir) / f"{axis}={v}"
        res = run_experiment(cfg, sub, data=data)
        if not res.records:
            raise ExperimentError(f"{axis}={v}: every run failed")
        g, auc = res.summary("gmean"), res.summary("roc_auc")
        rows.append([axis, v, g.runs, repr(g.mean), repr(g.std), repr(auc.mean), repr(auc.std)])
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _write_csv(Path(out_dir) / "sweep.csv", SWEEP_FIELDS, rows)
    return rows


def per_run_seeds(config: ExperimentConfig) -> list[int]:
    return [config.run_seed(i) for i in range(config.runs)]

