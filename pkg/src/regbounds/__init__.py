"""Certified bounds on untrained L2-regularized classifiers."""

__version__ = "0.1.0"

from .bounds import (
    CBoundCurve,
    SignStability,
    ValidationBounds,
    ball_from_model,
    ball_from_suboptimal,
    cbound_curve,
    cbound_curves,
    sign_stability_interval,
    validation_bounds,
    validation_error,
)
from .data import DataFormatError, Dataset, KernelSpec, gram, load_libsvm, parse_libsvm, split, to_libsvm
from .geometry import (
    Ball,
    DualSpan,
    EmptyIntersection,
    IncompatibleVectors,
    Interval,
    PrimalDense,
    bound_inner,
    bound_inner_intersection,
    inner,
    norm,
    recursive_tighten,
)
from .lasso import LassoDualBall, lasso_dual_ball, residual_bounds, safe_screen
from .losses import HINGE, LOGISTIC, LossModel, decision_values, loss_gradient_sum
from .selection import (
    CandidateGrid,
    PathReport,
    choose_next,
    epsilon_path,
    fast_loocv,
    log_grid,
    lr_inference_from_svm,
    naive_loocv,
    select_model,
)
from .trainer import ConvergenceError, SolverConfig, TrainedModel, train, train_lasso

__all__ = [
    "Ball",
    "CBoundCurve",
    "CandidateGrid",
    "ConvergenceError",
    "DataFormatError",
    "Dataset",
    "DualSpan",
    "EmptyIntersection",
    "HINGE",
    "IncompatibleVectors",
    "Interval",
    "KernelSpec",
    "LOGISTIC",
    "LassoDualBall",
    "LossModel",
    "PathReport",
    "PrimalDense",
    "SignStability",
    "SolverConfig",
    "TrainedModel",
    "ValidationBounds",
    "ball_from_model",
    "ball_from_suboptimal",
    "bound_inner",
    "bound_inner_intersection",
    "cbound_curve",
    "cbound_curves",
    "choose_next",
    "decision_values",
    "epsilon_path",
    "fast_loocv",
    "gram",
    "inner",
    "lasso_dual_ball",
    "load_libsvm",
    "log_grid",
    "loss_gradient_sum",
    "lr_inference_from_svm",
    "naive_loocv",
    "norm",
    "parse_libsvm",
    "recursive_tighten",
    "residual_bounds",
    "safe_screen",
    "select_model",
    "sign_stability_interval",
    "split",
    "to_libsvm",
    "train",
    "train_lasso",
    "validation_bounds",
    "validation_error",
]
