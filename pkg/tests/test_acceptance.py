"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The Pima experiments (criteria 8 and 9) share one 30-run sweep and take
roughly a quarter of an hour on a single core.
"""

import itertools
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps

from mixboost.classifier import MLP, gradient_check
from mixboost.core import (
    MixConfig,
    entropy,
    entropy_table_from_probs,
    ew_marginals,
    ew_select_pair,
    mix_pair,
    r_select_pair,
    sample_lambda,
)
from mixboost.dataset import Dataset
from mixboost.experiment import ExperimentConfig, run_experiment
from mixboost.metrics import gmean_from_rates, roc_auc
from mixboost.stats import DirichletConfig, bayesian_signed_test

PIMA = Path(__file__).parent / "data" / "pima.csv"
RUNS = 30


def _toy(n_maj, n_min, width=3, seed=0):
    rng = np.random.default_rng(seed)
    y = np.r_[np.zeros(n_maj, int), np.ones(n_min, int)]
    return Dataset.from_hard_labels(rng.random((n_maj + n_min, width)), y)


def test_criterion_01_mixing_identities(acceptance_report):
    rng = np.random.default_rng(1)
    x0 = rng.normal(size=(10_000, 6)) * 10.0 ** rng.integers(-3, 4, size=(10_000, 1))
    x1 = rng.normal(size=(10_000, 6)) * 10.0 ** rng.integers(-3, 4, size=(10_000, 1))
    t = time.perf_counter()
    exact_one = exact_zero = True
    worst_mid = 0.0
    for a, b in zip(x0, x1):
        exact_one &= np.array_equal(mix_pair(a, b, 1.0).features, a)
        exact_zero &= np.array_equal(mix_pair(a, b, 0.0).features, b)
        mid = mix_pair(a, b, 0.5)
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        worst_mid = max(worst_mid, float(np.max(np.abs(mid.features - (a + b) / 2) / scale)))
        exact_one &= np.array_equal(mid.label, [0.5, 0.5])
    elapsed = time.perf_counter() - t
    ok = exact_one and exact_zero and worst_mid <= 1e-12 and elapsed < 1.0
    acceptance_report(1, "mixing identities", ok,
                      f"lam=1/0 bit-exact={exact_one and exact_zero} midpoint err={worst_mid:.1e} t={elapsed:.2f}s")
    assert ok


def test_criterion_02_entropy_suite(acceptance_report):
    t = time.perf_counter()
    e_uniform = float(entropy(np.array([0.5, 0.5])))
    e_onehot = entropy(np.array([[1.0, 0.0], [0.0, 1.0]]))
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        n_maj, n_min = rng.integers(1, 40, size=2)
        data = _toy(n_maj, n_min, seed=int(rng.integers(1 << 30)))
        p = rng.random(n_maj + n_min)
        table = entropy_table_from_probs(np.stack([1 - p, p], axis=1), data)
        worst = max(worst, abs(table.majority_ratios.sum() - 1), abs(table.minority_ratios.sum() - 1))
    elapsed = time.perf_counter() - t
    ok = abs(e_uniform - np.log(2)) <= 1e-9 and np.all(e_onehot == 0) and worst <= 1e-9 and elapsed < 1.0
    acceptance_report(2, "entropy suite", ok,
                      f"E(uniform)-ln2={e_uniform - np.log(2):.1e} ratio-sum err={worst:.1e} t={elapsed:.2f}s")
    assert ok


def test_criterion_03_selection_distributions(acceptance_report):
    draws = 100_000
    data = _toy(40, 9)
    rng = np.random.default_rng(3)
    t = time.perf_counter()
    pairs = np.array([r_select_pair(data, rng) for _ in range(draws)])
    maj_counts = np.bincount(pairs[:, 0], minlength=len(data))[:40]
    min_counts = np.bincount(pairs[:, 1], minlength=len(data))[40:]
    p_maj = sps.chisquare(maj_counts).pvalue
    p_min = sps.chisquare(min_counts).pvalue

    p = rng.beta(0.7, 0.7, size=len(data))
    table = entropy_table_from_probs(np.stack([1 - p, p], axis=1), data)
    pairs = np.array([ew_select_pair(table, rng) for _ in range(draws)])
    maj_exp, min_exp = ew_marginals(table)
    maj_emp = np.bincount(pairs[:, 0], minlength=len(data))[table.majority_rows] / draws
    min_emp = np.bincount(pairs[:, 1], minlength=len(data))[table.minority_rows] / draws
    dev = max(np.max(np.abs(maj_emp - maj_exp)), np.max(np.abs(min_emp - min_exp)))
    elapsed = time.perf_counter() - t
    ok = p_maj > 0.01 and p_min > 0.01 and dev <= 0.01 and elapsed < 10.0
    acceptance_report(3, "selection distributions", ok,
                      f"R chi2 p={p_maj:.3f}/{p_min:.3f} EW max dev={dev:.4f} t={elapsed:.1f}s")
    assert ok


def test_criterion_04_lambda_sampler(acceptance_report):
    cfg = MixConfig(alpha=0.5)
    rng = np.random.default_rng(4)
    t = time.perf_counter()
    lam = np.array([sample_lambda(cfg, rng) for _ in range(100_000)])
    elapsed = time.perf_counter() - t
    a = cfg.alpha
    mean_expected = 0.5
    var_expected = a * a / ((2 * a) ** 2 * (2 * a + 1))
    ok = abs(lam.mean() - mean_expected) <= 0.005 and abs(lam.var() - var_expected) <= 0.005 and elapsed < 1.0
    acceptance_report(4, "lambda sampler Beta(0.5, 0.5)", ok,
                      f"mean={lam.mean():.4f} var={lam.var():.4f} (expected {var_expected}) t={elapsed:.2f}s")
    assert ok


def test_criterion_05_gradient_check(acceptance_report):
    rng = np.random.default_rng(5)
    t = time.perf_counter()
    worst = 0.0
    for init in range(10):
        x = rng.random((8, 8))
        lam = rng.random(8)
        batch = Dataset(x, np.stack([lam, 1 - lam], axis=1), np.zeros(8, bool), ("0", "1"))
        small = MLP((8, 16, 16, 2), seed=init)
        worst = max(worst, gradient_check(small, batch, n_checks=None, seed=init))
        wide = MLP((8, 256, 256, 2), seed=init)
        worst = max(worst, gradient_check(wide, batch, n_checks=200, seed=init))
    elapsed = time.perf_counter() - t
    ok = worst < 1e-3 and elapsed < 30.0
    acceptance_report(5, "MLP gradient check", ok, f"max rel err={worst:.2e} t={elapsed:.1f}s")
    assert ok


def _auc_brute(scores, is_min):
    pos, neg = scores[is_min], scores[~is_min]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_criterion_06_metric_oracles(acceptance_report):
    rng = np.random.default_rng(6)
    t = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, size=n)
        y[:2] = [0, 1]
        scores = np.round(rng.random(n), int(rng.integers(1, 4)))
        mismatches += roc_auc(scores, y) != _auc_brute(scores, y == 1)
    g = gmean_from_rates(0.81, 0.49)
    elapsed = time.perf_counter() - t
    ok = mismatches == 0 and g == 0.63 and elapsed < 5.0
    acceptance_report(6, "metric oracles", ok, f"auc mismatches={mismatches} gmean(0.81,0.49)={g!r} t={elapsed:.2f}s")
    assert ok


def test_criterion_07_bayesian_signed_test(acceptance_report):
    t = time.perf_counter()
    zero = bayesian_signed_test(np.zeros(10))
    plus = bayesian_signed_test(np.full(10, 0.2))
    sym = bayesian_signed_test(np.r_[np.full(6, -0.1), np.full(6, 0.1)], DirichletConfig(rope_width=0.0))
    elapsed = time.perf_counter() - t
    ok = zero.p_rope >= 0.99 and plus.p_right > 0.99 and abs(sym.p_left - sym.p_right) < 0.02 and elapsed < 10.0
    acceptance_report(7, "Bayesian signed test", ok,
                      f"zeros p_rope={zero.p_rope:.4f} +0.2 p_right={plus.p_right:.4f} "
                      f"symmetric |L-R|={abs(sym.p_left - sym.p_right):.4f} t={elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def pima_runs():
    base = ExperimentConfig(dataset=str(PIMA), label_column="Class", name="pima", min_count=4, runs=RUNS)
    variants = {
        "none": replace(base, method="none"),
        "R": replace(base, mix=MixConfig(strategy="R")),
        "EW": replace(base, mix=MixConfig(strategy="EW")),
        "EW_k1": replace(base, mix=MixConfig(strategy="EW", iterations=1)),
    }
    out = {}
    for key, cfg in variants.items():
        t = time.perf_counter()
        result = run_experiment(cfg)
        assert result.ok, result.failures
        out[key] = (result.summary("gmean"), time.perf_counter() - t)
    return out


def test_criterion_08_pima_mixboost_beats_baseline(acceptance_report, pima_runs):
    base = pima_runs["none"][0].mean
    r, ew = pima_runs["R"][0].mean, pima_runs["EW"][0].mean
    elapsed = sum(pima_runs[k][1] for k in ("none", "R", "EW"))
    ok = max(r, ew) - base >= 0.10
    acceptance_report(8, "Pima R4: MixBoost g-mean >= baseline + 0.10", ok,
                      f"baseline={base:.3f} R={r:.3f} EW={ew:.3f} runs={RUNS} t={elapsed:.0f}s")
    assert ok


def test_criterion_09_iterative_not_worse_than_single(acceptance_report, pima_runs):
    k5, k1 = pima_runs["EW"][0].mean, pima_runs["EW_k1"][0].mean
    ok = k5 >= k1 - 0.02
    acceptance_report(9, "Pima R4: k=5 g-mean >= k=1 g-mean - 0.02", ok,
                      f"EW k=5={k5:.3f} k=1={k1:.3f} strictly better={k5 > k1}")
    assert ok


def _cli(out_dir):
    cmd = [sys.executable, "-m", "mixboost.cli", "run", "--dataset", str(PIMA), "--label-column", "Class",
           "--runs", "3", "--epochs", "15", "--hidden", "16", "--seed", "11", "--out", str(out_dir)]
    subprocess.run(cmd, check=True, capture_output=True)


def test_criterion_10_end_to_end_determinism(acceptance_report, tmp_path):
    _cli(tmp_path / "a")
    _cli(tmp_path / "b")
    same = {name: (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
            for name in ("results.csv", "summary.csv", "config.txt")}
    ok = all(same.values())
    acceptance_report(10, "byte-identical result CSVs across invocations", ok,
                      " ".join(f"{k}={v}" for k, v in same.items()))
    assert ok
