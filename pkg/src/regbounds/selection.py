"""Model selection driven by validation-error bounds.

* :func:`select_model` trains candidates in order of their smallest certified
  validation-error lower bound and stops once no untrained candidate can beat
  the best error found.
* :func:`epsilon_path` walks ``[C_min, C_max]`` upward, training only where the
  certified sign pattern of the validation set runs out.
* :func:`fast_loocv` skips leave-one-out refits whose held-out sign is certified.
* :func:`lr_inference_from_svm` bounds logistic-regression coefficients and log
  odds from an SVM solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import ball_from_suboptimal, error_bounds, sign_stability_limits
from .data import Dataset, KernelSpec, kernel_diag, kernel_matrix
from .geometry import Interval, PrimalDense, combine, inner, lens_bounds, norm
from .losses import HINGE, LOGISTIC, LossModel, decision_values, misclassification, span_of
from .trainer import SolverConfig, TrainedModel, train


def log_grid(c_min: float, c_max: float, count: int) -> np.ndarray:
    """Log-spaced candidates with both endpoints included."""
    if count < 1:
        raise ValueError("grid count must be >= 1")
    if not 0 < c_min:
        raise ValueError("C_min must be positive")
    if count == 1:
        return np.array([float(c_min)])
    if not c_min < c_max:
        raise ValueError("C_min must be smaller than C_max")
    grid = np.logspace(math.log10(c_min), math.log10(c_max), count)
    grid[0], grid[-1] = c_min, c_max
    return grid


@dataclass
class CandidateGrid:
    """Per-candidate state of the selection loop; bounds are stored as error counts."""

    C: np.ndarray
    n_val: int
    lo: np.ndarray = None
    hi: np.ndarray = None
    solved: np.ndarray = None
    errors: np.ndarray = None

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        if self.C.size == 0:
            raise ValueError("empty candidate grid")
        if np.any(self.C <= 0) or np.any(np.diff(self.C) < 0):
            raise ValueError("candidates must be positive and sorted")
        T = self.C.size
        if self.lo is None:
            self.lo = np.zeros(T, dtype=int)
            self.hi = np.full(T, self.n_val, dtype=int)
            self.solved = np.zeros(T, dtype=bool)
            self.errors = np.full(T, -1, dtype=int)

    @property
    def T(self) -> int:
        return self.C.size

    @property
    def eps_lo(self) -> np.ndarray:
        return self.lo / self.n_val

    @property
    def eps_hi(self) -> np.ndarray:
        return self.hi / self.n_val


def choose_next(grid: CandidateGrid) -> int:
    """Untrained candidate with the smallest lower bound; ties go to the smaller ``C``."""
    open_ = np.flatnonzero(~grid.solved)
    if open_.size == 0:
        raise ValueError("no untrained candidate left")
    return int(open_[np.argmin(grid.lo[open_])])


class _ValView:
    """Validation decision values and feature norms, cached per model."""

    def __init__(self, train: Dataset, val: Dataset, kernel: KernelSpec):
        self.train = train
        self.val = val
        self.kernel = kernel
        self.norms = np.sqrt(np.maximum(kernel_diag(val.dense, kernel), 0.0))
        self._cross = None

    def values(self, model: TrainedModel) -> np.ndarray:
        if self.kernel.linear:
            return decision_values(self.val, self.kernel, model.w)
        if self._cross is None:
            self._cross = kernel_matrix(self.val.dense, self.train.dense, self.kernel)
        return self._cross @ model.w.coef


@dataclass
class _Trained:
    model: TrainedModel
    v: np.ndarray
    wnorm: float
    errors: int


def _single_bounds(t: _Trained, C: float, tn: np.ndarray):
    s = (C + t.model.C) / (2.0 * t.model.C)
    r = abs(C - t.model.C) / (2.0 * t.model.C) * t.wnorm
    tm = s * t.v
    return tm - tn * r, tm + tn * r


def _pair_bounds(a: _Trained, b: _Trained, ab: float, C: float, tn: np.ndarray):
    s1 = (C + a.model.C) / (2.0 * a.model.C)
    s2 = (C + b.model.C) / (2.0 * b.model.C)
    r1 = abs(C - a.model.C) / (2.0 * a.model.C) * a.wnorm
    r2 = abs(C - b.model.C) / (2.0 * b.model.C) * b.wnorm
    anorm = math.sqrt(max(s1 * s1 * a.wnorm**2 + s2 * s2 * b.wnorm**2 - 2.0 * s1 * s2 * ab, 0.0))
    return lens_bounds(s1 * a.v, s2 * b.v, tn, anorm, s1 * a.v - s2 * b.v, r1, r2)


@dataclass
class SelectionResult:
    best: TrainedModel
    best_index: int
    grid: CandidateGrid
    order: list
    history: list = field(default_factory=list)

    @property
    def trained_count(self) -> int:
        return int(self.grid.solved.sum())

    @property
    def best_C(self) -> float:
        return float(self.grid.C[self.best_index])

    @property
    def best_error(self) -> float:
        return self.grid.errors[self.best_index] / self.grid.n_val

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "trained_count": self.trained_count,
            "T": g.T,
            "best_C": self.best_C,
            "best_error": self.best_error,
            "order": [int(i) for i in self.order],
            "candidates": [
                {
                    "C": float(g.C[t]),
                    "err_lo": float(g.eps_lo[t]),
                    "err_hi": float(g.eps_hi[t]),
                    "solved": bool(g.solved[t]),
                }
                for t in range(g.T)
            ],
            "history": self.history,
        }


def select_model(
    train_set: Dataset,
    val: Dataset,
    kernel: KernelSpec,
    loss: LossModel,
    grid,
    cfg: SolverConfig = SolverConfig(),
    record_history: bool = True,
) -> SelectionResult:
    """Find the candidate with the smallest validation error, training as few as possible.

    Every untrained candidate's bounds come from its two nearest trained
    neighbours (one below, one above) via the intersection of their balls, and
    are merged monotonically with earlier bounds. The returned model's error
    equals the minimum over exhaustive training of the grid.
    """
    if not isinstance(grid, CandidateGrid):
        grid = CandidateGrid(np.asarray(grid, dtype=float), val.n)
    if val.n == 0:
        raise ValueError("empty validation set")
    view = _ValView(train_set, val, kernel)
    tn = view.norms
    y = val.y
    trained: dict[int, _Trained] = {}
    pair_ip: dict[tuple[int, int], float] = {}
    order: list[int] = []
    history: list = []

    def fit(t: int) -> _Trained:
        model = train(train_set, kernel, loss, float(grid.C[t]), cfg)
        v = view.values(model)
        tr = _Trained(model, v, norm(model.w), int(np.sum(misclassification(y, v))))
        trained[t] = tr
        grid.solved[t] = True
        grid.errors[t] = grid.lo[t] = grid.hi[t] = tr.errors
        order.append(t)
        return tr

    def inner_of(i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        if key not in pair_ip:
            pair_ip[key] = inner(trained[i].model.w, trained[j].model.w)
        return pair_ip[key]

    def refresh(lo_idx: int, hi_idx: int, it: int):
        solved_idx = np.flatnonzero(grid.solved)
        for t in range(lo_idx, hi_idx + 1):
            if grid.solved[t]:
                continue
            below = solved_idx[solved_idx < t]
            above = solved_idx[solved_idx > t]
            C = float(grid.C[t])
            if below.size and above.size:
                i, j = int(below[-1]), int(above[0])
                lo, hi = _pair_bounds(trained[i], trained[j], inner_of(i, j), C, tn)
            else:
                lo, hi = _single_bounds(trained[int(below[-1]) if below.size else int(above[0])], C, tn)
            vb = error_bounds(lo, hi, y)
            new_lo = max(grid.lo[t], vb.certain_errors)
            new_hi = min(grid.hi[t], vb.n - vb.certain_correct)
            if record_history and (new_lo != grid.lo[t] or new_hi != grid.hi[t]):
                history.append({"iteration": it, "index": t, "err_lo": new_lo / vb.n, "err_hi": new_hi / vb.n})
            grid.lo[t], grid.hi[t] = new_lo, new_hi

    first = fit(0)
    best_t, best_err = 0, first.errors
    refresh(0, grid.T - 1, 1)
    it = 1
    while True:
        open_ = ~grid.solved & (grid.lo < best_err)
        if not open_.any():
            break
        t = choose_next(grid)
        it += 1
        solved_idx = np.flatnonzero(grid.solved)
        below = solved_idx[solved_idx < t]
        above = solved_idx[solved_idx > t]
        tr = fit(t)
        if tr.errors < best_err:
            best_t, best_err = t, tr.errors
        # only candidates between the old neighbours of t see new neighbours
        refresh(int(below[-1]) + 1 if below.size else 0, int(above[0]) - 1 if above.size else grid.T - 1, it)
    return SelectionResult(trained[best_t].model, best_t, grid, order, history)


def exhaustive_errors(train_set: Dataset, val: Dataset, kernel: KernelSpec, loss: LossModel, grid, cfg=SolverConfig()):
    """Validation error counts from training every candidate (reference answer)."""
    out = []
    for C in np.asarray(grid, dtype=float):
        m = train(train_set, kernel, loss, float(C), cfg)
        out.append(int(np.sum(misclassification(val.y, decision_values(val, kernel, m.w)))))
    return np.array(out)


# ---------------------------------------------------------------------------
# epsilon-approximate validation path


@dataclass(frozen=True)
class PathPoint:
    """A trained model at ``C`` whose error is certified on ``[C, next_C)``.

    ``gap`` marks a forced minimal step: nothing is certified past ``C``.
    """

    C: float
    errors: int
    next_C: float
    uncertified: int
    gap: bool = False


@dataclass
class PathReport:
    points: list
    epsilon: float
    C_min: float
    C_max: float
    n_val: int
    allowance: int

    @property
    def trained_count(self) -> int:
        return len(self.points)

    @property
    def breakpoints(self) -> list:
        return [(p.C, p.errors / self.n_val) for p in self.points]

    @property
    def gaps(self) -> list:
        return [(p.C, p.next_C) for p in self.points if p.gap]

    def point_for(self, C: float) -> PathPoint:
        """The path model responsible for ``C``."""
        if not self.C_min <= C <= self.C_max:
            raise ValueError(f"C={C} outside [{self.C_min}, {self.C_max}]")
        Cs = [p.C for p in self.points]
        k = int(np.searchsorted(Cs, C, side="right")) - 1
        return self.points[max(k, 0)]

    def best(self) -> PathPoint:
        return min(self.points, key=lambda p: (p.errors, p.C))

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "C_min": self.C_min,
            "C_max": self.C_max,
            "n_val": self.n_val,
            "allowance": self.allowance,
            "trained_count": self.trained_count,
            "best_C": self.best().C,
            "best_error": self.best().errors / self.n_val,
            "points": [
                {
                    "C": p.C,
                    "error": p.errors / self.n_val,
                    "next_C": p.next_C,
                    "uncertified": p.uncertified,
                    "gap": p.gap,
                }
                for p in self.points
            ],
        }


def epsilon_path(
    train_set: Dataset,
    val: Dataset,
    kernel: KernelSpec,
    loss: LossModel,
    C_min: float,
    C_max: float,
    epsilon: float,
    cfg: SolverConfig = SolverConfig(),
    step: float = 1.001,
    max_models: int = 1_000_000,
) -> PathReport:
    """Models covering ``[C_min, C_max]`` so every ``C`` is within ``epsilon`` of a trained error.

    From each trained ``C`` the next one is the smallest ``C`` at which more
    than ``floor(n' epsilon)`` validation signs lose their certificate. Where
    not even one more instance can be certified the step falls back to
    ``C * step`` and the point is flagged as a gap.
    """
    if not 0 < C_min < C_max:
        raise ValueError("need 0 < C_min < C_max")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if val.n == 0:
        raise ValueError("empty validation set")
    view = _ValView(train_set, val, kernel)
    n_val = val.n
    allowance = int(math.floor(n_val * epsilon + 1e-9))
    points = []
    C = float(C_min)
    warm = None
    while True:
        if len(points) >= max_models:
            raise RuntimeError(f"path needs more than {max_models} models")
        model = train(train_set, kernel, loss, C, SolverConfig(cfg.tolerance, cfg.max_iters, warm))
        warm = model.w
        v = view.values(model)
        errors = int(np.sum(misclassification(val.y, v)))
        _, _, c_hi = sign_stability_limits(v, view.norms * norm(model.w), C)
        if allowance >= n_val:
            nxt = math.inf
        else:
            nxt = float(np.sort(c_hi)[allowance])
        gap = not nxt > C
        if gap:
            nxt = C * step
        points.append(PathPoint(C, errors, nxt, int(np.sum(c_hi <= nxt)), gap))
        if nxt > C_max:
            break
        C = nxt
    return PathReport(points, float(epsilon), float(C_min), float(C_max), n_val, allowance)


# ---------------------------------------------------------------------------
# leave-one-out cross-validation


@dataclass
class LoocvResult:
    loocv_error: float
    solved_count: int
    skipped_count: int
    errors: int
    lo: np.ndarray
    hi: np.ndarray
    skipped: np.ndarray

    @property
    def n(self) -> int:
        return self.skipped.size

    def to_dict(self) -> dict:
        return {
            "loocv_error": self.loocv_error,
            "errors": self.errors,
            "n": self.n,
            "solved_count": self.solved_count,
            "skipped_count": self.skipped_count,
        }


def _loo_error(y: float, value: float) -> bool:
    return (y > 0 and value < 0) or (y < 0 and value > 0)


def _without(ds: Dataset, j: int) -> Dataset:
    keep = np.ones(ds.n, dtype=bool)
    keep[j] = False
    return ds.subset(np.flatnonzero(keep))


def loo_value(ds: Dataset, kernel: KernelSpec, loss: LossModel, C: float, j: int, cfg=SolverConfig()) -> float:
    """``phi_j . w*_(-j)`` from an actual refit without instance ``j``."""
    model = train(_without(ds, j), kernel, loss, C, cfg)
    return float(decision_values(ds.subset([j]), kernel, model.w)[0])


def loo_bounds(ds: Dataset, kernel: KernelSpec, model: TrainedModel):
    """Bounds on ``phi_j . w*_(-j)`` for every ``j`` from the full-data model.

    The ball for the leave-``j``-out problem uses ``w_tilde = w*_all`` and the
    loss sum over ``i != j`` at the same ``C``.
    """
    C = model.C
    g = model.weights
    gsum = span_of(ds, kernel, g)
    R = combine(1.0, model.w, C, gsum)
    f = decision_values(ds, kernel, model.w)
    gf = decision_values(ds, kernel, gsum)
    Rf = decision_values(ds, kernel, R)
    kd = kernel_diag(ds.dense, kernel)
    center = 0.5 * (f - C * gf) + 0.5 * C * g * kd
    r2 = 0.25 * (R.sqnorm - 2.0 * C * g * Rf + (C * g) ** 2 * kd)
    r = np.sqrt(np.maximum(r2, 0.0))
    tn = np.sqrt(np.maximum(kd, 0.0))
    return center - tn * r, center + tn * r


def fast_loocv(
    ds: Dataset,
    kernel: KernelSpec,
    loss: LossModel,
    C: float,
    cfg: SolverConfig = SolverConfig(),
) -> LoocvResult:
    """Leave-one-out error, refitting only instances whose held-out sign is uncertain."""
    if ds.n < 2:
        raise ValueError("LOOCV needs at least 2 instances")
    model = train(ds, kernel, loss, C, cfg)
    lo, hi = loo_bounds(ds, kernel, model)
    skipped = (lo > 0) | (hi < 0)
    errors = 0
    for j in range(ds.n):
        if skipped[j]:
            errors += int((ds.y[j] > 0 and hi[j] < 0) or (ds.y[j] < 0 and lo[j] > 0))
        else:
            errors += int(_loo_error(ds.y[j], loo_value(ds, kernel, loss, C, j, cfg)))
    n_skip = int(skipped.sum())
    return LoocvResult(errors / ds.n, ds.n - n_skip, n_skip, errors, lo, hi, skipped)


def naive_loocv(ds: Dataset, kernel: KernelSpec, loss: LossModel, C: float, cfg=SolverConfig()):
    """Reference LOOCV: one refit per instance. Returns ``(error, per-instance values)``."""
    values = np.array([loo_value(ds, kernel, loss, C, j, cfg) for j in range(ds.n)])
    errs = sum(_loo_error(y, v) for y, v in zip(ds.y, values))
    return errs / ds.n, values


# ---------------------------------------------------------------------------
# logistic regression inference from an SVM solution


@dataclass
class LRInference:
    svm: TrainedModel
    radius: float
    radius_refined: float
    coef_single: list
    coef_refined: list
    logodds_single: list
    logodds_refined: list

    def to_dict(self) -> dict:
        svm_w = self.svm.w.values
        return {
            "C": self.svm.C,
            "radius": self.radius,
            "radius_second": self.radius_refined,
            "coefficients": [
                {
                    "j": j + 1,
                    "svm": float(svm_w[j]),
                    "single": [s.lo, s.hi],
                    "intersected": [r.lo, r.hi],
                }
                for j, (s, r) in enumerate(zip(self.coef_single, self.coef_refined))
            ],
            "log_odds": [
                {"single": [s.lo, s.hi], "intersected": [r.lo, r.hi]}
                for s, r in zip(self.logodds_single, self.logodds_refined)
            ],
        }


def _rows_bounds(Theta: np.ndarray, b1, b2):
    m1 = b1.center.values
    m2 = b2.center.values
    axis = m1 - m2
    tn = np.linalg.norm(Theta, axis=1)
    tm1 = Theta @ m1
    lo_s, hi_s = tm1 - tn * b1.radius, tm1 + tn * b1.radius
    lo_r, hi_r = lens_bounds(tm1, Theta @ m2, tn, np.linalg.norm(axis), Theta @ axis, b1.radius, b2.radius)
    single = [Interval(float(a), float(b)) for a, b in zip(lo_s, hi_s)]
    refined = [Interval(float(a), float(b)) for a, b in zip(lo_r, hi_r)]
    return single, refined


def lr_inference_from_svm(
    ds: Dataset,
    C: float,
    x_new: Optional[np.ndarray] = None,
    w_tilde: Optional[PrimalDense] = None,
    kernel: KernelSpec = KernelSpec(),
    cfg: SolverConfig = SolverConfig(),
) -> LRInference:
    """Bound the L2 logistic-regression optimum at ``C`` using the SVM optimum.

    The SVM solution (or ``w_tilde``) seeds a ball for the logistic problem;
    its centre seeds a second ball, and the two are intersected. Coefficient
    ``j`` is bounded with ``theta = e_j``, log odds of ``x`` with ``theta = x``.
    """
    if not kernel.linear:
        raise ValueError("LR inference from an SVM needs the linear kernel")
    svm = train(ds, kernel, HINGE, C, cfg)
    w0 = svm.w if w_tilde is None else w_tilde
    b1 = ball_from_suboptimal(w0, ds, kernel, LOGISTIC, C)
    b2 = ball_from_suboptimal(b1.center, ds, kernel, LOGISTIC, C)
    coef_single, coef_refined = _rows_bounds(np.eye(ds.d), b1, b2)
    if x_new is not None and len(x_new):
        lo_single, lo_refined = _rows_bounds(np.atleast_2d(np.asarray(x_new, dtype=float)), b1, b2)
    else:
        lo_single, lo_refined = [], []
    return LRInference(svm, b1.radius, b2.radius, coef_single, coef_refined, lo_single, lo_refined)
