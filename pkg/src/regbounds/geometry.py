"""Feature-space vectors, certifying balls and interval bounds on inner products.

A vector either lives in ``R^d`` (:class:`PrimalDense`) or is a finite
combination ``sum_i c_i phi(b_i)`` of kernel feature maps (:class:`DualSpan`).
Everything the bounds need reduces to inner products, so both forms support
``inner``/``norm`` and linear combinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .data import KernelSpec, kernel_matrix


class IncompatibleVectors(ValueError):
    """Raised when two feature vectors live in different feature spaces."""


class EmptyIntersection(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PrimalDense:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())

    @cached_property
    def sqnorm(self) -> float:
        return float(self.values @ self.values)

    def scaled(self, s: float) -> "PrimalDense":
        return PrimalDense(s * self.values)

    def to_primal(self) -> "PrimalDense":
        return self


@dataclass(frozen=True, eq=False)
class DualSpan:
    """``sum_i coef[i] * phi(basis[i])`` under ``kernel``.

    ``gram`` may carry the precomputed ``K(basis, basis)``; vectors sharing the
    same ``basis`` object reuse it.
    """

    coef: np.ndarray
    basis: np.ndarray
    kernel: KernelSpec
    gram: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "coef", np.asarray(self.coef, dtype=float).ravel())
        if self.basis.shape[0] != self.coef.shape[0]:
            raise ValueError("one coefficient per basis point is required")

    def _gram(self) -> np.ndarray:
        if self.gram is None:
            from .data import gram_dense

            object.__setattr__(self, "gram", gram_dense(self.basis, self.kernel))
        return self.gram

    @cached_property
    def sqnorm(self) -> float:
        return max(float(self.coef @ self._gram() @ self.coef), 0.0)

    def scaled(self, s: float) -> "DualSpan":
        return DualSpan(s * self.coef, self.basis, self.kernel, self.gram)

    def to_primal(self) -> PrimalDense:
        if not self.kernel.linear:
            raise IncompatibleVectors("only linear-kernel spans have a primal form")
        return PrimalDense(self.basis.T @ self.coef)


FeatureVector = Union[PrimalDense, DualSpan]


def point(x: np.ndarray, kernel: KernelSpec) -> FeatureVector:
    """The feature map ``phi(x)`` of a single input."""
    x = np.asarray(x, dtype=float).ravel()
    if kernel.linear:
        return PrimalDense(x)
    return DualSpan(np.ones(1), x[None, :], kernel)


def _common(a: FeatureVector, b: FeatureVector):
    if isinstance(a, PrimalDense) and isinstance(b, PrimalDense):
        if a.values.shape != b.values.shape:
            raise IncompatibleVectors(f"dimension {a.values.size} vs {b.values.size}")
        return a, b
    if isinstance(a, DualSpan) and isinstance(b, DualSpan):
        if a.kernel != b.kernel:
            raise IncompatibleVectors("vectors built from different kernels")
        return a, b
    span = a if isinstance(a, DualSpan) else b
    if not span.kernel.linear:
        raise IncompatibleVectors("cannot mix a primal vector with a nonlinear kernel span")
    return a.to_primal(), b.to_primal()


def inner(a: FeatureVector, b: FeatureVector) -> float:
    a, b = _common(a, b)
    if isinstance(a, PrimalDense):
        return float(a.values @ b.values)
    if a.basis is b.basis:
        return float(a.coef @ a._gram() @ b.coef)
    return float(a.coef @ kernel_matrix(a.basis, b.basis, a.kernel) @ b.coef)


def norm(a: FeatureVector) -> float:
    return math.sqrt(a.sqnorm)


def combine(sa: float, a: FeatureVector, sb: float, b: FeatureVector) -> FeatureVector:
    """``sa * a + sb * b``."""
    a, b = _common(a, b)
    if isinstance(a, PrimalDense):
        return PrimalDense(sa * a.values + sb * b.values)
    if a.basis is b.basis:
        return DualSpan(sa * a.coef + sb * b.coef, a.basis, a.kernel, a.gram)
    return DualSpan(
        np.concatenate([sa * a.coef, sb * b.coef]),
        np.vstack([a.basis, b.basis]),
        a.kernel,
    )


def zeros_like(a: FeatureVector) -> FeatureVector:
    return a.scaled(0.0)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def within(self, other: "Interval", slack: float = 0.0) -> bool:
        return other.lo - slack <= self.lo and self.hi <= other.hi + slack

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Ball:
    center: FeatureVector
    radius: float

    def __post_init__(self):
        if not self.radius >= 0.0:
            raise ValueError(f"radius must be nonnegative, got {self.radius}")

    def to_dict(self) -> dict:
        c = self.center
        if isinstance(c, PrimalDense):
            rep = {"primal": c.values.tolist()}
        else:
            rep = {"dual_coef": c.coef.tolist(), "kernel": c.kernel.to_dict()}
        return {"center_repr": rep, "radius": self.radius}


def bound_inner(ball: Ball, theta: FeatureVector) -> Interval:
    """Interval ``theta.m -/+ ||theta|| r`` for ``theta.w`` over the ball."""
    tn = norm(theta)
    if tn == 0.0:
        return Interval(0.0, 0.0)
    tm = inner(theta, ball.center)
    return Interval(tm - tn * ball.radius, tm + tn * ball.radius)


def lens_bounds(tm1, tm2, tnorm, anorm, talpha, r1, r2):
    """Min and max of ``theta.w`` over the intersection of two balls.

    All arguments are scalars or broadcastable arrays of inner products:
    ``tm1 = theta.m1``, ``tm2 = theta.m2``, ``tnorm = ||theta||``,
    ``anorm = ||m1 - m2||``, ``talpha = theta.(m1 - m2)``. Balls that do not
    intersect (beyond rounding) fall back to the overlap of the two single-ball
    intervals, which is always a valid enclosure of the lens.

    Returns ``(lo, hi)`` arrays.
    """
    tm1, tm2, tnorm, anorm, talpha, r1, r2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (tm1, tm2, tnorm, anorm, talpha, r1, r2))
    )
    lo1, hi1 = tm1 - tnorm * r1, tm1 + tnorm * r1
    lo2, hi2 = tm2 - tnorm * r2, tm2 + tnorm * r2
    lo_single = np.maximum(lo1, lo2)
    hi_single = np.minimum(hi1, hi2)

    with np.errstate(divide="ignore", invalid="ignore"):
        plane = (anorm**2 + r2**2 - r1**2) / (2.0 * anorm)
        cos = talpha / (tnorm * anorm)
        cos = np.clip(cos, -1.0, 1.0)
        rim_t = tm2 + plane * talpha / anorm
        rim_r = np.sqrt(np.maximum(r2**2 - plane**2, 0.0))
        perp = np.sqrt(np.maximum(tnorm**2 - talpha**2 / anorm**2, 0.0))
        rim_lo = rim_t - rim_r * perp
        rim_hi = rim_t + rim_r * perp

        # plane: distance from centre 2 to the rim plane along the centre axis
        # maximiser of ball 1 lies inside ball 2 / maximiser of ball 2 inside ball 1
        b1_in = cos <= (plane - anorm) / r1
        b2_in = plane / r2 <= cos
        hi = np.where(b1_in, hi1, np.where(b2_in, hi2, rim_hi))
        b1_in = -cos <= (plane - anorm) / r1
        b2_in = plane / r2 <= -cos
        lo = np.where(b1_in, lo1, np.where(b2_in, lo2, rim_lo))

    # degenerate geometry: a point ball, concentric balls, theta = 0
    point1 = r1 == 0.0
    point2 = r2 == 0.0
    lo = np.where(point2, lo2, np.where(point1, lo1, lo))
    hi = np.where(point2, hi2, np.where(point1, hi1, hi))
    concentric = (anorm == 0.0) & ~point1 & ~point2
    small1 = r1 <= r2
    lo = np.where(concentric, np.where(small1, lo1, lo2), lo)
    hi = np.where(concentric, np.where(small1, hi1, hi2), hi)

    separated = anorm > (r1 + r2) * (1.0 + 1e-12) + 1e-300
    bad = ~np.isfinite(lo) | ~np.isfinite(hi) | separated
    lo = np.where(bad, lo_single, lo)
    hi = np.where(bad, hi_single, hi)

    lo = np.maximum(lo, lo_single)
    hi = np.minimum(hi, hi_single)
    crossed = lo > hi
    mid = 0.5 * (lo + hi)
    lo = np.where(crossed, mid, lo)
    hi = np.where(crossed, mid, hi)

    zero = tnorm == 0.0
    lo = np.where(zero, 0.0, lo)
    hi = np.where(zero, 0.0, hi)
    return lo, hi


def bound_inner_intersection(b1: Ball, b2: Ball, theta: FeatureVector) -> Interval:
    """Tightest interval for ``theta.w`` with ``w`` in both balls."""
    alpha = combine(1.0, b1.center, -1.0, b2.center)
    anorm = norm(alpha)
    if anorm > (b1.radius + b2.radius) * (1.0 + 1e-12) + 1e-300:
        raise EmptyIntersection(
            f"centers {anorm:.6g} apart exceed radii sum {b1.radius + b2.radius:.6g}"
        )
    tnorm = norm(theta)
    if tnorm == 0.0:
        return Interval(0.0, 0.0)
    lo, hi = lens_bounds(
        inner(theta, b1.center),
        inner(theta, b2.center),
        tnorm,
        anorm,
        inner(theta, alpha),
        b1.radius,
        b2.radius,
    )
    return Interval(float(lo), float(hi))


def recursive_tighten(w_tilde: FeatureVector, ds, kernel, loss, C: float, steps: int) -> list[Ball]:
    """Balls ``S(w_1), ..., S(w_steps)`` with ``w_1 = w_tilde`` and ``w_{t+1}`` the centre of ``S(w_t)``.

    Each centre sits on the sphere of the next ball, so consecutive balls
    always overlap and their intersection is at most half the earlier one.
    """
    from .bounds import ball_from_suboptimal

    if steps < 1:
        raise ValueError("steps must be >= 1")
    balls = []
    w = w_tilde
    for _ in range(steps):
        ball = ball_from_suboptimal(w, ds, kernel, loss, C)
        balls.append(ball)
        w = ball.center
    return balls
