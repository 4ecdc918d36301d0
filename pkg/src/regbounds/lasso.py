"""Lasso dual balls, residual intervals and safe feature screening.

The dual of ``min 0.5 ||y - X b||^2 + lam ||b||_1`` is the projection of
``y / lam`` onto ``{a : ||X' a||_inf <= 1}``, with optimum
``a* = (y - X b*) / lam``. For any feasible ``a~`` the optimum lies in the
ball whose diameter joins ``a~`` and ``y / lam``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Interval


@dataclass(frozen=True)
class LassoDualBall:
    center: np.ndarray
    radius: float
    lam: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def bound(self, theta) -> Interval:
        """Interval for ``theta . a*``."""
        theta = np.asarray(theta, dtype=float)
        tm = float(theta @ self.center)
        tn = float(np.linalg.norm(theta))
        return Interval(tm - tn * self.radius, tm + tn * self.radius)

    def contains(self, alpha, slack: float = 0.0) -> bool:
        return float(np.linalg.norm(np.asarray(alpha) - self.center)) <= self.radius + slack

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "radius": self.radius, "center": [float(v) for v in self.center]}


def feasible_dual(alpha: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Shrink ``alpha`` just enough that ``||X' alpha||_inf <= 1``."""
    alpha = np.asarray(alpha, dtype=float)
    scale = max(1.0, float(np.abs(np.asarray(X).T @ alpha).max(initial=0.0)))
    return alpha / scale


def lasso_dual_ball(alpha_tilde, y, lam: float, X: Optional[np.ndarray] = None) -> LassoDualBall:
    """Ball around the Lasso dual optimum from a dual guess ``alpha_tilde``.

    Containment needs ``alpha_tilde`` dual feasible. Passing ``X`` rescales it
    into the feasible set first; without ``X`` the caller vouches for it.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    a = np.asarray(alpha_tilde, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if a.shape != y.shape:
        raise ValueError(f"alpha_tilde has {a.size} entries, y has {y.size}")
    if X is not None:
        X = np.asarray(X, dtype=float)
        if X.shape[0] != y.size:
            raise ValueError(f"X has {X.shape[0]} rows, y has {y.size}")
        a = feasible_dual(a, X)
    target = y / lam
    return LassoDualBall(0.5 * (a + target), 0.5 * float(np.linalg.norm(a - target)), float(lam))


def residual_bounds(ball: LassoDualBall, i: int) -> Interval:
    """Interval containing the optimal residual ``y_i - x_i . b*``."""
    n = ball.center.size
    if not 0 <= i < n:
        raise IndexError(f"instance index {i} outside [0, {n})")
    m = float(ball.center[i])
    return Interval(ball.lam * (m - ball.radius), ball.lam * (m + ball.radius))


def residual_bounds_all(ball: LassoDualBall) -> tuple[np.ndarray, np.ndarray]:
    return ball.lam * (ball.center - ball.radius), ball.lam * (ball.center + ball.radius)


def screening_scores(X: np.ndarray, ball: LassoDualBall) -> np.ndarray:
    """Upper bound on ``|z_j . a*|`` for every column ``z_j``."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] != ball.center.size:
        raise ValueError(f"X has {X.shape[0]} rows, ball has dimension {ball.center.size}")
    zm = X.T @ ball.center
    zn = np.linalg.norm(X, axis=0)
    return np.maximum(np.abs(zm - zn * ball.radius), np.abs(zm + zn * ball.radius))


def safe_screen(X: np.ndarray, ball: LassoDualBall) -> np.ndarray:
    """Indices (0-based) of features whose optimal coefficient is certified zero."""
    return np.flatnonzero(screening_scores(X, ball) < 1.0)


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    return float(np.abs(np.asarray(X).T @ np.asarray(y)).max(initial=0.0))
