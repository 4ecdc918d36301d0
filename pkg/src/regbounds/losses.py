"""Convex margin losses and model evaluation ``f(x) = phi(x).w``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset, KernelSpec, kernel_matrix
from .geometry import DualSpan, FeatureVector, PrimalDense, IncompatibleVectors


@dataclass(frozen=True)
class LossModel:
    """A loss ``l(y, z)`` of the margin ``y * z``.

    ``deriv`` is d/dz of the loss (a fixed subgradient at kinks: the hinge
    uses 0 at ``y z = 1``). ``curvature`` is d2/dz2 where it exists.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("logistic", "hinge"):
            raise ValueError(f"unknown loss {self.kind!r}")

    @property
    def differentiable(self) -> bool:
        return self.kind == "logistic"

    def value(self, y, z):
        m = np.asarray(y) * np.asarray(z)
        if self.kind == "logistic":
            return np.logaddexp(0.0, -m)
        return np.maximum(0.0, 1.0 - m)

    def deriv(self, y, z):
        y = np.asarray(y, dtype=float)
        m = y * np.asarray(z, dtype=float)
        if self.kind == "logistic":
            return -y * expit(-m)
        return np.where(m < 1.0, -y, 0.0)

    def curvature(self, y, z):
        if self.kind != "logistic":
            raise ValueError("hinge loss has no curvature")
        m = np.asarray(y, dtype=float) * np.asarray(z, dtype=float)
        s = expit(m)
        return s * (1.0 - s)


LOGISTIC = LossModel("logistic")
HINGE = LossModel("hinge")


def decision_values(ds: Dataset, kernel: KernelSpec, w: FeatureVector) -> np.ndarray:
    """``phi(x_i).w`` for every instance of ``ds``."""
    if isinstance(w, PrimalDense):
        if not kernel.linear:
            raise IncompatibleVectors("primal weights need a linear kernel")
        if w.values.size != ds.d:
            raise IncompatibleVectors(f"weights of size {w.values.size} for d={ds.d}")
        return ds.X @ w.values
    if w.kernel != kernel:
        raise IncompatibleVectors("weights were built with a different kernel")
    if w.basis is ds.dense:
        return ds.gram(kernel) @ w.coef
    return kernel_matrix(ds.dense, w.basis, kernel) @ w.coef


def span_of(ds: Dataset, kernel: KernelSpec, coef: np.ndarray) -> FeatureVector:
    """``sum_i coef[i] phi(x_i)``; primal for the linear kernel."""
    if kernel.linear:
        return PrimalDense(ds.X.T @ coef)
    return DualSpan(coef, ds.dense, kernel, ds.gram(kernel))


def loss_weights(ds: Dataset, kernel: KernelSpec, loss: LossModel, w: FeatureVector) -> np.ndarray:
    """Per-instance ``dl(y_i, f_i)`` so that ``grad l_i(w) = weights[i] * phi_i``."""
    return loss.deriv(ds.y, decision_values(ds, kernel, w))


def loss_gradient_sum(ds: Dataset, kernel: KernelSpec, loss: LossModel, w: FeatureVector) -> FeatureVector:
    """``sum_i grad l_i(w)``, which lies in the span of the training feature maps."""
    return span_of(ds, kernel, loss_weights(ds, kernel, loss, w))


def total_loss(ds: Dataset, kernel: KernelSpec, loss: LossModel, w: FeatureVector) -> float:
    return float(np.sum(loss.value(ds.y, decision_values(ds, kernel, w))))


def objective(ds: Dataset, kernel: KernelSpec, loss: LossModel, w: FeatureVector, C: float) -> float:
    """``0.5 ||w||^2 + C sum_i l(y_i, f_i)``."""
    return 0.5 * w.sqnorm + C * total_loss(ds, kernel, loss, w)


def misclassification(y: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Error indicators; a decision value of exactly 0 predicts +1."""
    pred = np.where(f >= 0.0, 1.0, -1.0)
    return pred != y
