"""Bayesian signed test for comparing two methods over several datasets.

The posterior over the distribution of per-dataset differences is a Dirichlet
process; with a prior pseudo-observation at ``z0`` of strength ``s`` it reduces
to Dirichlet weights over the observed deltas plus the pseudo-observation. Each
posterior draw yields the probability mass of the left / rope / right regions,
i.e. one point in the 2-simplex.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal

import numpy as np


@dataclass(frozen=True)
class DirichletConfig:
    prior_strength: float = 0.5
    prior_point: float = 0.0
    rope_width: float = 0.01
    posterior_samples: int = 50_000
    seed: int = 0

    def __post_init__(self):
        if self.prior_strength <= 0:
            raise ValueError("prior_strength must be positive")
        if self.rope_width < 0:
            raise ValueError("rope_width must be >= 0")
        if self.posterior_samples < 1000:
            raise ValueError("posterior_samples must be >= 1000")


@dataclass(frozen=True)
class SignedTestResult:
    """Posterior probabilities that A is better (left), neither (rope), B is better (right)."""

    p_left: float
    p_rope: float
    p_right: float
    rope_width: float
    attribution: str = "max"


def simplex_points(differences, config: DirichletConfig) -> np.ndarray:
    """Posterior draws of (left mass, rope mass, right mass), shape (samples, 3).

    ``differences`` are per-dataset metric deltas B - A.
    """
    d = np.asarray(differences, dtype=float).ravel()
    if len(d) == 0:
        raise ValueError("need at least one difference")
    z = np.concatenate([[config.prior_point], d])
    alpha = np.concatenate([[config.prior_strength], np.ones(len(d))])
    rng = np.random.default_rng(config.seed)
    w = rng.dirichlet(alpha, size=config.posterior_samples)
    r = config.rope_width
    regions = np.stack([z < -r, np.abs(z) <= r, z > r], axis=1).astype(float)
    return w @ regions


def bayesian_signed_test(
    differences,
    config: DirichletConfig | None = None,
    attribution: Literal["max", "mean"] = "max",
) -> SignedTestResult:
    """Region probabilities from the Dirichlet posterior.

    ``attribution="max"`` counts, per draw, the region with the largest mass
    (the triangle-region reading); ``"mean"`` reports expected masses instead.
    """
    config = config or DirichletConfig()
    d = np.asarray(differences, dtype=float).ravel()
    if len(d) < 2:
        raise ValueError(f"need at least 2 datasets, got {len(d)}")
    pts = simplex_points(d, config)
    if attribution == "max":
        winners = np.argmax(pts, axis=1)
        probs = np.bincount(winners, minlength=3) / len(pts)
    elif attribution == "mean":
        probs = pts.mean(axis=0)
        probs = probs / probs.sum()
    else:
        raise ValueError(f"unknown attribution {attribution!r}")
    return SignedTestResult(float(probs[0]), float(probs[1]), float(probs[2]), config.rope_width, attribution)


def write_simplex_csv(points: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["left", "rope", "right"])
        for row in points:
            w.writerow([repr(float(v)) for v in row])
