"""High-precision solvers for L2-regularized classifiers and for the Lasso.

``train`` minimises ``0.5 ||w||^2 + C sum_i l(y_i, phi_i.w)`` with no bias term:

* logistic, linear kernel: damped Newton in the primal;
* logistic, rbf kernel: Newton on the span coefficients ``w = sum_i c_i phi_i``;
* hinge: the box-constrained dual QP, L-BFGS-B followed by an exact
  active-set finish.

``train_lasso`` is cyclic coordinate descent with a duality-gap stop and a
support-restricted least-squares polish.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .data import Dataset, KernelSpec
from .geometry import DualSpan, FeatureVector, PrimalDense
from .losses import LossModel, decision_values, span_of

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, grad_norm: float):
        super().__init__(f"{msg} (achieved {grad_norm:.3e})")
        self.grad_norm = grad_norm


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-10
    max_iters: int = 200
    warm_start: Optional[FeatureVector] = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.max_iters > 0:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Solution ``w*_C`` with its optimality certificate.

    ``weights[i]`` is the derivative of ``l_i`` used at the solution, so
    ``w + C * sum_i weights[i] phi_i`` is the stationarity residual whose
    feature-space norm is ``grad_norm``. For the hinge loss the weights come
    from the dual solution, i.e. a subgradient selection that makes the
    residual vanish.
    """

    w: FeatureVector
    C: float
    loss: LossModel
    kernel: KernelSpec
    grad_norm: float
    weights: np.ndarray
    iterations: int = 0

    @property
    def coef(self) -> np.ndarray:
        """Span coefficients ``c`` with ``w = sum_i c_i phi_i``."""
        return -self.C * self.weights

    def to_dict(self) -> dict:
        d = {
            "loss": self.loss.kind,
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "dual_coef": self.coef.tolist(),
        }
        if isinstance(self.w, PrimalDense):
            d["w"] = self.w.values.tolist()
        return d


def _feature_norm(ds: Dataset, kernel: KernelSpec, coef: np.ndarray) -> float:
    if kernel.linear:
        v = ds.X.T @ coef
        return float(np.sqrt(v @ v))
    return math.sqrt(max(float(coef @ ds.gram(kernel) @ coef), 0.0))


def stationarity(ds: Dataset, kernel: KernelSpec, loss: LossModel, w: FeatureVector, C: float) -> float:
    """``|| w + C sum_i grad l_i(w) ||`` with the loss's own subgradient choice."""
    from .losses import loss_gradient_sum
    from .geometry import combine, norm

    return norm(combine(1.0, w, C, loss_gradient_sum(ds, kernel, loss, w)))


def train(
    ds: Dataset,
    kernel: KernelSpec,
    loss: LossModel,
    C: float,
    cfg: SolverConfig = SolverConfig(),
) -> TrainedModel:
    if ds.n == 0:
        raise ValueError("cannot train on an empty dataset")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    if loss.kind == "logistic":
        if kernel.linear:
            return _logistic_primal(ds, kernel, loss, C, cfg)
        return _logistic_span(ds, kernel, loss, C, cfg)
    return _hinge_dual(ds, kernel, loss, C, cfg)


def _roundoff_floor(w, C, weights, phi_norms) -> float:
    """Stationarity residual attainable in double precision for this problem size."""
    wn = float(np.linalg.norm(w)) if np.ndim(w) else float(w)
    scale = wn + C * float(np.abs(weights) @ phi_norms)
    return 1e-13 * scale * math.sqrt(len(weights))


def _accept(obj_new, obj, slope, t, gn_new, gn):
    return obj_new <= obj + 1e-4 * t * slope or gn_new <= 0.5 * gn


def _logistic_primal(ds, kernel, loss, C, cfg) -> TrainedModel:
    X = ds.dense
    y = ds.y
    d = ds.d
    w = np.zeros(d)
    if cfg.warm_start is not None:
        w = cfg.warm_start.to_primal().values.copy()

    def state(w):
        f = X @ w
        g = w + C * (X.T @ loss.deriv(y, f))
        obj = 0.5 * (w @ w) + C * float(np.sum(loss.value(y, f)))
        return f, g, obj

    f, g, obj = state(w)
    gn = float(np.linalg.norm(g))
    best = gn
    stall = 0
    it = 0
    while gn > cfg.tolerance:
        if it >= cfg.max_iters or stall >= 5:
            if gn <= _roundoff_floor(w, C, loss.deriv(y, f), np.linalg.norm(X, axis=1)):
                log.debug("logistic Newton stopped at rounding level %.3e", gn)
                break
            raise ConvergenceError("logistic Newton did not converge", gn)
        it += 1
        D = loss.curvature(y, f)
        H = np.eye(d) + C * (X.T @ (D[:, None] * X))
        step = np.linalg.solve(H, g)
        slope = -float(g @ step)
        t = 1.0
        while True:
            w_new = w - t * step
            f_new, g_new, obj_new = state(w_new)
            gn_new = float(np.linalg.norm(g_new))
            if _accept(obj_new, obj, slope, t, gn_new, gn) or t < 1e-12:
                break
            t *= 0.5
        w, f, g, obj, gn = w_new, f_new, g_new, obj_new, gn_new
        if gn < 0.5 * best:
            best, stall = gn, 0
        else:
            stall += 1
    return TrainedModel(PrimalDense(w), C, loss, kernel, gn, loss.deriv(y, f), it)


def _logistic_span(ds, kernel, loss, C, cfg) -> TrainedModel:
    G = ds.gram(kernel)
    y = ds.y
    n = ds.n
    c = np.zeros(n)
    if cfg.warm_start is not None:
        ws = cfg.warm_start
        if isinstance(ws, DualSpan) and ws.basis is ds.dense:
            c = ws.coef.copy()
        else:
            # fit span coefficients to the warm start's decision values
            f0 = decision_values(ds, kernel, ws)
            c = np.linalg.lstsq(G, f0, rcond=None)[0]

    def state(c):
        f = G @ c
        v = c + C * loss.deriv(y, f)
        gn = math.sqrt(max(float(v @ G @ v), 0.0))
        obj = 0.5 * float(c @ f) + C * float(np.sum(loss.value(y, f)))
        return f, v, gn, obj

    f, v, gn, obj = state(c)
    best = gn
    stall = 0
    it = 0
    while gn > cfg.tolerance:
        if it >= cfg.max_iters or stall >= 5:
            wn = math.sqrt(max(float(c @ f), 0.0))
            if gn <= _roundoff_floor(wn, C, loss.deriv(y, f), np.sqrt(np.diag(G))):
                log.debug("kernel logistic Newton stopped at rounding level %.3e", gn)
                break
            raise ConvergenceError("kernel logistic Newton did not converge", gn)
        it += 1
        D = loss.curvature(y, f)
        J = np.eye(n) + C * D[:, None] * G
        step = np.linalg.solve(J, v)
        slope = -float((G @ v) @ step)
        t = 1.0
        while True:
            c_new = c - t * step
            f_new, v_new, gn_new, obj_new = state(c_new)
            if _accept(obj_new, obj, slope, t, gn_new, gn) or t < 1e-12:
                break
            t *= 0.5
        c, f, v, gn, obj = c_new, f_new, v_new, gn_new, obj_new
        if gn < 0.5 * best:
            best, stall = gn, 0
        else:
            stall += 1
    w = DualSpan(c, ds.dense, kernel, G)
    return TrainedModel(w, C, loss, kernel, gn, loss.deriv(y, f), it)


def _kkt_residual(a, g, C):
    pg = np.where(a <= 0.0, np.minimum(g, 0.0), np.where(a >= C, np.maximum(g, 0.0), g))
    return float(np.linalg.norm(pg))


def _free_step(QFF, b, aF):
    """Step on the free block: to the subproblem minimiser when it exists,
    otherwise along a zero-curvature descent ray (``cap`` is then infinite)."""
    lam, V = np.linalg.eigh(QFF)
    keep = lam > max(lam.max(initial=0.0), 1.0) * 1e-13 * max(len(lam), 1)
    Vr, Vn = V[:, keep], V[:, ~keep]
    bn = Vn @ (Vn.T @ b)
    if np.linalg.norm(bn) > 1e-10 * max(np.linalg.norm(b), 1.0):
        return bn, np.inf
    x = Vr @ ((Vr.T @ b) / lam[keep]) + Vn @ (Vn.T @ aF)
    return x - aF, 1.0


def _box_qp_active_set(Q, a, C, tol, max_iters):
    """Finish ``min 0.5 a'Qa - sum(a), 0 <= a <= C`` from a nearby point."""
    snap = 1e-9 * C
    a = np.where(a < snap, 0.0, np.where(a > C - snap, C, a))
    free = (a > 0.0) & (a < C)
    for it in range(max_iters):
        F = np.flatnonzero(free)
        if F.size:
            N = np.flatnonzero(~free)
            rhs = 1.0 - Q[np.ix_(F, N)] @ a[N]
            p, cap = _free_step(Q[np.ix_(F, F)], rhs, a[F])
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hi = np.where(p > 0, (C - a[F]) / p, np.inf)
                t_lo = np.where(p < 0, -a[F] / p, np.inf)
            t_each = np.minimum(t_hi, t_lo)
            t = min(cap, float(t_each.min()))
            a[F] += t * p
            if t < cap:
                hit = t_each <= t
                a[F[hit]] = np.where(p[hit] > 0, C, 0.0)
                free[F[hit]] = False
                continue
        g = Q @ a - 1.0
        viol = np.where(~free & (a <= 0.0), -g, np.where(~free & (a >= C), g, 0.0))
        if viol.max(initial=0.0) <= 0.0 or _kkt_residual(a, g, C) <= tol:
            return a, _kkt_residual(a, g, C), it
        free[int(np.argmax(viol))] = True
    g = Q @ a - 1.0
    return a, _kkt_residual(a, g, C), max_iters


def _hinge_dual(ds, kernel, loss, C, cfg) -> TrainedModel:
    G = ds.gram(kernel)
    y = ds.y
    Q = (y[:, None] * y[None, :]) * G
    n = ds.n

    def fun(a):
        Qa = Q @ a
        return 0.5 * float(a @ Qa) - float(a.sum()), Qa - 1.0

    res = minimize(
        fun,
        np.zeros(n),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, C)] * n,
        options={"maxiter": 50 * max(cfg.max_iters, 100), "ftol": 0.0, "gtol": 1e-13, "maxcor": 30},
    )
    a, kkt, it = _box_qp_active_set(Q, np.clip(res.x, 0.0, C), C, cfg.tolerance, 20 * n + 100)
    floor = 1e-13 * math.sqrt(n) * (1.0 + np.abs(Q).max() * a.sum())
    if kkt > max(cfg.tolerance, floor):
        raise ConvergenceError("hinge dual did not converge", kkt)
    coef = a * y
    w = span_of(ds, kernel, coef)
    return TrainedModel(w, C, loss, kernel, kkt, -coef / C, int(res.nit) + it)


# ---------------------------------------------------------------------------
# Lasso


@dataclass(frozen=True)
class LassoSolution:
    """``beta`` minimises ``0.5 ||y - X beta||^2 + lam ||beta||_1``.

    ``alpha = (y - X beta) / lam``, rescaled if needed so that
    ``||X' alpha||_inf <= 1``; it is the dual optimum once ``gap`` is ~0.
    """

    beta: np.ndarray
    alpha: np.ndarray
    gap: float
    iterations: int

    def __iter__(self):
        return iter((self.beta, self.alpha))


def lasso_objective(X, y, beta, lam) -> float:
    r = y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def lasso_dual_point(X, y, beta, lam) -> np.ndarray:
    """Feasible dual point built from any primal iterate."""
    r = y - X @ beta
    scale = max(lam, float(np.abs(X.T @ r).max(initial=0.0)))
    return r / scale


def lasso_gap(X, y, beta, lam) -> float:
    alpha = lasso_dual_point(X, y, beta, lam)
    dual = 0.5 * float(y @ y) - 0.5 * lam**2 * float(np.sum((alpha - y / lam) ** 2))
    return lasso_objective(X, y, beta, lam) - dual


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def lasso_cd_epochs(X, y, lam, epochs: int, beta0=None) -> np.ndarray:
    """Run ``epochs`` full cyclic coordinate-descent sweeps; no stopping test."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.zeros(X.shape[1]) if beta0 is None else np.array(beta0, dtype=float)
    col_sq = np.einsum("ij,ij->j", X, X)
    r = y - X @ beta
    for _ in range(epochs):
        for j in range(X.shape[1]):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = X[:, j] @ r + col_sq[j] * old
            beta[j] = _soft(rho, lam) / col_sq[j]
            if beta[j] != old:
                r -= X[:, j] * (beta[j] - old)
    return beta


def _polish_support(X, y, beta, lam):
    S = np.flatnonzero(beta)
    if S.size == 0:
        return np.zeros_like(beta)
    s = np.sign(beta[S])
    XS = X[:, S]
    try:
        bS = np.linalg.solve(XS.T @ XS, XS.T @ y - lam * s)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.sign(bS) != s):
        return None
    out = np.zeros_like(beta)
    out[S] = bS
    r = y - X @ out
    if np.abs(X.T @ r).max() > lam * (1.0 + 1e-12):
        return None
    return out


def train_lasso(X, y, lam: float, cfg: SolverConfig = SolverConfig()) -> LassoSolution:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y disagree on the number of rows")
    beta = np.zeros(X.shape[1])
    sweeps = 0
    max_sweeps = 1000 * cfg.max_iters
    gap = lasso_gap(X, y, beta, lam)
    while gap > cfg.tolerance:
        if sweeps >= max_sweeps:
            raise ConvergenceError("lasso coordinate descent did not converge", gap)
        beta = lasso_cd_epochs(X, y, lam, 10, beta)
        sweeps += 10
        gap = lasso_gap(X, y, beta, lam)
        if gap <= max(1e-6, cfg.tolerance):
            polished = _polish_support(X, y, beta, lam)
            if polished is not None:
                pgap = lasso_gap(X, y, polished, lam)
                if pgap < gap:
                    beta, gap = polished, pgap
    return LassoSolution(beta, lasso_dual_point(X, y, beta, lam), gap, sweeps)
