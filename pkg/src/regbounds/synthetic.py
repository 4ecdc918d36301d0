"""Seeded synthetic datasets for demos and tests."""

from __future__ import annotations

import numpy as np

from .data import Dataset


def two_gaussians(n: int, d: int, separation: float = 1.0, seed=0) -> Dataset:
    """Balanced-ish classes drawn from unit Gaussians whose means sit ``separation`` apart."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    shift = np.zeros(d)
    shift[0] = 0.5 * separation
    X = rng.normal(size=(n, d)) + y[:, None] * shift
    return Dataset.from_dense(X, y)


def regression_problem(n: int, d: int, nonzero: int = 3, noise: float = 0.1, seed=0):
    """``(X, y)`` with a sparse ground-truth coefficient vector."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    beta = np.zeros(d)
    k = min(nonzero, d)
    beta[rng.choice(d, k, replace=False)] = rng.normal(scale=2.0, size=k)
    return X, X @ beta + noise * rng.normal(size=n)
