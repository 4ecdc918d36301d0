"""Balls around unknown optima, C-parametrized bounds and validation-error bounds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import Dataset, KernelSpec, kernel_diag
from .geometry import Ball, FeatureVector, Interval, combine, inner, norm
from .losses import LossModel, decision_values, loss_weights, misclassification, span_of
from .trainer import TrainedModel


def ball_from_weights(w_tilde: FeatureVector, ds: Dataset, kernel: KernelSpec, weights: np.ndarray, C: float) -> Ball:
    """Ball for an arbitrary ``w_tilde`` given per-instance (sub)gradient weights.

    ``sum_i grad l_i(w_tilde) = sum_i weights[i] phi_i``; any valid
    subgradient selection gives a ball that contains ``w*_C``.
    """
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    g = span_of(ds, kernel, np.asarray(weights, dtype=float))
    center = combine(0.5, w_tilde, -0.5 * C, g)
    radius = 0.5 * norm(combine(1.0, w_tilde, C, g))
    return Ball(center, radius)


def ball_from_suboptimal(w_tilde: FeatureVector, ds: Dataset, kernel: KernelSpec, loss: LossModel, C: float) -> Ball:
    """Ball ``{w : ||w - m|| <= r}`` certified to contain ``w*_C``.

    ``m = (w_tilde - C g) / 2`` and ``r = ||w_tilde + C g|| / 2`` where ``g`` is
    the loss gradient sum at ``w_tilde`` (kinks use the loss's fixed subgradient).
    """
    return ball_from_weights(w_tilde, ds, kernel, loss_weights(ds, kernel, loss, w_tilde), C)


def ball_from_model(model: TrainedModel, C: float) -> Ball:
    """Ball for ``w*_C`` built from an optimum at another ``C``.

    Uses ``-w*/C_ref`` as the loss subgradient sum, which is valid for
    non-differentiable losses too.
    """
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    Ct = model.C
    return Ball(model.w.scaled((C + Ct) / (2.0 * Ct)), abs(C - Ct) / (2.0 * Ct) * norm(model.w))


@dataclass(frozen=True)
class CBoundCurve:
    """Bounds on ``theta.w*_C`` as closed-form functions of ``C``.

    Vectorised over several ``theta``: ``tw[k] = theta_k.w*`` and
    ``tnw[k] = ||theta_k|| ||w*||`` at the reference ``C_ref``.
    """

    C_ref: float
    tw: np.ndarray
    tnw: np.ndarray

    def evaluate(self, C: float) -> tuple[np.ndarray, np.ndarray]:
        if not C > 0:
            raise ValueError(f"C must be positive, got {C}")
        v, p = self.tw, self.tnw
        if C == self.C_ref:
            return v.copy(), v.copy()
        s = C / (2.0 * self.C_ref)
        if C > self.C_ref:
            return 0.5 * (v + p) + s * (v - p), 0.5 * (v - p) + s * (v + p)
        return 0.5 * (v - p) + s * (v + p), 0.5 * (v + p) + s * (v - p)

    def b_lo(self, C: float) -> np.ndarray:
        return self.evaluate(C)[0]

    def b_up(self, C: float) -> np.ndarray:
        return self.evaluate(C)[1]

    def interval(self, C: float, k: int = 0) -> Interval:
        lo, hi = self.evaluate(C)
        return Interval(float(lo[k]), float(hi[k]))


def _curve(C_ref, tw, tn, wn) -> CBoundCurve:
    tw = np.atleast_1d(np.asarray(tw, dtype=float))
    tnw = np.atleast_1d(np.asarray(tn, dtype=float)) * wn
    # Cauchy-Schwarz may fail by an ulp; keep |tw| <= tnw so the bounds stay ordered
    tnw = np.maximum(tnw, np.abs(tw))
    return CBoundCurve(float(C_ref), tw, tnw)


def cbound_curve(model: TrainedModel, theta: FeatureVector) -> CBoundCurve:
    return _curve(model.C, inner(theta, model.w), norm(theta), norm(model.w))


def cbound_curves(model: TrainedModel, points: Dataset) -> CBoundCurve:
    """One curve per instance of ``points`` with ``theta_i = phi(x_i)``."""
    tw = decision_values(points, model.kernel, model.w)
    tn = np.sqrt(np.maximum(kernel_diag(points.dense, model.kernel), 0.0))
    return _curve(model.C, tw, tn, norm(model.w))


def instance_bounds(ball: Ball, points: Dataset, kernel: KernelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance bounds of ``phi(x_i).w`` over the ball."""
    tm = decision_values(points, kernel, ball.center)
    tn = np.sqrt(np.maximum(kernel_diag(points.dense, kernel), 0.0))
    return tm - tn * ball.radius, tm + tn * ball.radius


@dataclass(frozen=True)
class ValidationBounds:
    lo: np.ndarray
    hi: np.ndarray
    certain_errors: int
    certain_correct: int
    n: int

    @property
    def error_lo(self) -> float:
        return self.certain_errors / self.n

    @property
    def error_hi(self) -> float:
        return (self.n - self.certain_correct) / self.n

    @property
    def undetermined(self) -> int:
        return self.n - self.certain_errors - self.certain_correct


def error_bounds(lo: np.ndarray, hi: np.ndarray, y: np.ndarray) -> ValidationBounds:
    """Misclassification-rate bounds from per-instance decision-value intervals.

    Strict inequalities: an interval touching 0 leaves the instance
    undetermined.
    """
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty validation set")
    pos = y > 0
    errors = int(np.sum(pos & (hi < 0)) + np.sum(~pos & (lo > 0)))
    correct = int(np.sum(pos & (lo > 0)) + np.sum(~pos & (hi < 0)))
    return ValidationBounds(np.asarray(lo), np.asarray(hi), errors, correct, y.size)


BoundSource = Union[Ball, CBoundCurve, TrainedModel]


def validation_bounds(
    source: BoundSource,
    valset: Dataset,
    kernel: Optional[KernelSpec] = None,
    C: Optional[float] = None,
) -> ValidationBounds:
    """Validation-error bounds from a ball, a curve set (at ``C``) or a model (at ``C``)."""
    if valset.n == 0:
        raise ValueError("empty validation set")
    if isinstance(source, Ball):
        lo, hi = instance_bounds(source, valset, kernel)
    elif isinstance(source, CBoundCurve):
        lo, hi = source.evaluate(C)
    elif isinstance(source, TrainedModel):
        lo, hi = cbound_curves(source, valset).evaluate(source.C if C is None else C)
    else:
        raise TypeError(f"unsupported bound source {type(source).__name__}")
    return error_bounds(lo, hi, valset.y)


def validation_error(model: TrainedModel, valset: Dataset) -> float:
    """Exact misclassification rate of ``model`` (decision value 0 predicts +1)."""
    return float(np.mean(misclassification(valset.y, decision_values(valset, model.kernel, model.w))))


def validation_error_count(model: TrainedModel, valset: Dataset) -> int:
    return int(np.sum(misclassification(valset.y, decision_values(valset, model.kernel, model.w))))


@dataclass(frozen=True)
class SignStability:
    """``sign(phi.w*_C)`` is certified equal to ``sign`` for ``c_lo < C < c_hi``.

    ``sign == 0`` means nothing is certified (``c_lo == c_hi == C_ref``).
    """

    sign: int
    c_lo: float
    c_hi: float


def sign_stability_limits(v, p, C_ref: float):
    """Vectorised certified ``C`` ranges around ``C_ref``.

    ``v = phi.w*``, ``p = ||phi|| ||w*||``. Returns ``(sign, c_lo, c_hi)``
    arrays; ``c_hi`` is ``inf`` when the sign persists for every larger ``C``.
    """
    v = np.asarray(v, dtype=float)
    p = np.maximum(np.asarray(p, dtype=float), np.abs(v))
    a = np.abs(v)
    sign = np.sign(v).astype(int)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(p - a > 0, C_ref * (p + a) / (p - a), np.inf)
        down = np.where(p + a > 0, C_ref * (p - a) / (p + a), C_ref)
    up = np.where(sign == 0, C_ref, up)
    down = np.where(sign == 0, C_ref, down)
    return sign, down, up


def sign_stability_interval(model: TrainedModel, x) -> SignStability:
    """Range of ``C`` over which the sign of ``phi(x).w*_C`` is certified."""
    from .geometry import point

    theta = point(np.asarray(x, dtype=float), model.kernel) if not hasattr(x, "sqnorm") else x
    s, lo, hi = sign_stability_limits(inner(theta, model.w), norm(theta) * norm(model.w), model.C)
    return SignStability(int(s), float(lo), float(hi))

