"""Command-line interface.

Exit codes: 0 success, 1 input/output failure, 2 usage error, 3 solver did
not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bounds import cbound_curves, error_bounds, validation_error_count
from .data import DataFormatError, Dataset, KernelSpec, align, load_libsvm, split
from .lasso import lambda_max, lasso_dual_ball, safe_screen
from .losses import LossModel
from .report import to_csv, to_json, write_text
from .selection import epsilon_path, fast_loocv, log_grid, lr_inference_from_svm, select_model
from .trainer import ConvergenceError, SolverConfig, lasso_cd_epochs, lasso_dual_point, train

log = logging.getLogger("regbounds")


class UsageError(Exception):
    pass


def _positive(name):
    def conv(s):
        v = float(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {s}")
        return v

    return conv


def _add_common(p: argparse.ArgumentParser, val: bool = False, loss: bool = True):
    p.add_argument("--data", required=True, help="training data, LIBSVM format")
    if val:
        p.add_argument("--val", help="validation data; if omitted --data is split")
        p.add_argument("--split", type=float, default=0.5, help="training fraction when splitting (default 0.5)")
        p.add_argument("--seed", type=int, default=0, help="shuffle seed for the split (default 0)")
    if loss:
        p.add_argument("--loss", choices=("logistic", "hinge"), default="logistic")
        p.add_argument("--kernel", choices=("linear", "rbf"), default="linear")
        p.add_argument("--gamma", type=_positive("--gamma"), help="rbf width (default 1/d)")
    p.add_argument("--tol", type=_positive("--tol"), default=1e-10, help="solver tolerance (default 1e-10)")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--out", help="JSON report path (default: stdout)")


def _add_grid(p, count_default=501):
    p.add_argument("--c-min", type=float, default=0.01)
    p.add_argument("--c-max", type=float, default=10000.0)
    p.add_argument("--c-count", type=int, default=count_default)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regbounds", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and write it as JSON")
    _add_common(p)
    p.add_argument("--c", type=float, required=True)

    p = sub.add_parser("bounds", help="validation-error bounds over a C grid from one trained model")
    _add_common(p, val=True)
    p.add_argument("--c", type=float, required=True, help="C of the trained reference model")
    _add_grid(p, 101)
    p.add_argument("--csv", help="CSV of C, err_lo, err_hi")

    p = sub.add_parser("model-select", help="grid search that skips provably worse candidates")
    _add_common(p, val=True)
    _add_grid(p)
    p.add_argument("--csv", help="CSV of C, err_lo, err_hi, solved_flag")

    p = sub.add_parser("path", help="epsilon-approximate validation-error path")
    _add_common(p, val=True)
    p.add_argument("--c-min", type=float, default=0.01)
    p.add_argument("--c-max", type=float, default=10000.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--csv", help="CSV of C, error, next_C, gap")

    p = sub.add_parser("loocv", help="leave-one-out error, skipping certified instances")
    _add_common(p)
    p.add_argument("--c", type=float, required=True)

    p = sub.add_parser("lasso-screen", help="safe screening of Lasso features")
    _add_common(p, loss=False)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, help="penalty")
    g.add_argument("--lambda-ratio", type=float, default=0.5, help="penalty as a fraction of lambda_max (default 0.5)")
    p.add_argument("--epochs", type=int, default=5, help="coordinate-descent sweeps for the dual guess (default 5)")

    p = sub.add_parser("lr-from-svm", help="bound logistic-regression coefficients from an SVM")
    _add_common(p, loss=False)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--new", help="LIBSVM file of inputs whose log odds to bound (labels ignored)")
    p.add_argument("--csv", help="CSV of j, svm, single_lo, single_hi, intersected_lo, intersected_hi")
    return ap


def _cfg(args) -> SolverConfig:
    if args.max_iters < 1:
        raise UsageError("--max-iters must be >= 1")
    return SolverConfig(args.tol, args.max_iters)


def _check_c(C):
    if not C > 0:
        raise UsageError(f"C must be positive, got {C}")
    return float(C)


def _kernel(args, d: int) -> KernelSpec:
    if args.kernel == "linear":
        return KernelSpec()
    return KernelSpec.rbf(args.gamma) if args.gamma else KernelSpec.default_rbf(d)


def _train_val(args) -> tuple[Dataset, Dataset]:
    ds = load_libsvm(args.data)
    if args.val:
        return align(ds, load_libsvm(args.val))
    if not 0 < args.split < 1:
        raise UsageError("--split must lie in (0, 1)")
    return split(ds, args.split, args.seed)


def _grid(args) -> np.ndarray:
    _check_c(args.c_min)
    if args.c_count < 1:
        raise UsageError("--c-count must be >= 1")
    if args.c_count > 1 and not args.c_min < args.c_max:
        raise UsageError("--c-min must be smaller than --c-max")
    return log_grid(args.c_min, args.c_max, args.c_count)


def _emit(args, payload: dict, csv_text: Optional[str] = None):
    text = to_json(payload)
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    if csv_text is not None and getattr(args, "csv", None):
        write_text(args.csv, csv_text)


def cmd_train(args) -> int:
    C = _check_c(args.c)
    ds = load_libsvm(args.data)
    kernel = _kernel(args, ds.d)
    model = train(ds, kernel, LossModel(args.loss), C, _cfg(args))
    _emit(args, {"n": ds.n, "d": ds.d, **model.to_dict()})
    return 0


def cmd_bounds(args) -> int:
    C = _check_c(args.c)
    grid = _grid(args)
    tr, va = _train_val(args)
    kernel = _kernel(args, tr.d)
    model = train(tr, kernel, LossModel(args.loss), C, _cfg(args))
    curves = cbound_curves(model, va)
    rows = []
    for c in grid:
        vb = error_bounds(*curves.evaluate(float(c)), va.y)
        rows.append((float(c), vb.error_lo, vb.error_hi))
    payload = {
        "C_ref": C,
        "error_at_C_ref": validation_error_count(model, va) / va.n,
        "n_train": tr.n,
        "n_val": va.n,
        "curve": [{"C": c, "err_lo": lo, "err_hi": hi} for c, lo, hi in rows],
    }
    _emit(args, payload, to_csv(["C", "err_lo", "err_hi"], rows))
    return 0


def cmd_model_select(args) -> int:
    grid = _grid(args)
    tr, va = _train_val(args)
    kernel = _kernel(args, tr.d)
    res = select_model(tr, va, kernel, LossModel(args.loss), grid, _cfg(args))
    g = res.grid
    payload = {"loss": args.loss, "kernel": kernel.to_dict(), "n_train": tr.n, "n_val": va.n, **res.to_dict()}
    rows = [(float(g.C[t]), float(g.eps_lo[t]), float(g.eps_hi[t]), bool(g.solved[t])) for t in range(g.T)]
    _emit(args, payload, to_csv(["C", "err_lo", "err_hi", "solved_flag"], rows))
    return 0


def cmd_path(args) -> int:
    _check_c(args.c_min)
    if not args.c_min < args.c_max:
        raise UsageError("--c-min must be smaller than --c-max")
    if not 0 <= args.epsilon <= 1:
        raise UsageError("--epsilon must lie in [0, 1]")
    tr, va = _train_val(args)
    kernel = _kernel(args, tr.d)
    rep = epsilon_path(tr, va, kernel, LossModel(args.loss), args.c_min, args.c_max, args.epsilon, _cfg(args))
    payload = {"loss": args.loss, "kernel": kernel.to_dict(), "n_train": tr.n, **rep.to_dict()}
    rows = [(p.C, p.errors / rep.n_val, p.next_C, p.gap) for p in rep.points]
    _emit(args, payload, to_csv(["C", "error", "next_C", "gap"], rows))
    return 0


def cmd_loocv(args) -> int:
    C = _check_c(args.c)
    ds = load_libsvm(args.data)
    if ds.n < 2:
        raise UsageError("LOOCV needs at least 2 instances")
    kernel = _kernel(args, ds.d)
    res = fast_loocv(ds, kernel, LossModel(args.loss), C, _cfg(args))
    _emit(args, {"C": C, "loss": args.loss, "kernel": kernel.to_dict(), **res.to_dict()})
    return 0


def cmd_lasso_screen(args) -> int:
    ds = load_libsvm(args.data, classification=False)
    X, y = ds.dense, ds.y
    lmax = lambda_max(X, y)
    if args.lam is not None:
        lam = args.lam
    else:
        if not 0 < args.lambda_ratio:
            raise UsageError("--lambda-ratio must be positive")
        lam = args.lambda_ratio * lmax
    if not lam > 0:
        raise UsageError(f"lambda must be positive, got {lam}")
    if args.epochs < 0:
        raise UsageError("--epochs must be >= 0")
    beta = lasso_cd_epochs(X, y, lam, args.epochs)
    ball = lasso_dual_ball(lasso_dual_point(X, y, beta, lam), y, lam, X)
    screened = safe_screen(X, ball)
    _emit(
        args,
        {
            "lambda": lam,
            "lambda_max": lmax,
            "epochs": args.epochs,
            "d": ds.d,
            "screened_indices": [int(j) + 1 for j in screened],
            "screened_count": int(screened.size),
            "ball_radius": ball.radius,
        },
    )
    return 0


def cmd_lr_from_svm(args) -> int:
    C = _check_c(args.c)
    ds = load_libsvm(args.data)
    x_new = None
    if args.new:
        new = load_libsvm(args.new, classification=False)
        ds, new = align(ds, new)
        x_new = new.dense
    res = lr_inference_from_svm(ds, C, x_new=x_new, cfg=_cfg(args))
    payload = res.to_dict()
    rows = [
        (c["j"], c["svm"], c["single"][0], c["single"][1], c["intersected"][0], c["intersected"][1])
        for c in payload["coefficients"]
    ]
    header = ["j", "svm", "single_lo", "single_hi", "intersected_lo", "intersected_hi"]
    _emit(args, payload, to_csv(header, rows))
    return 0


COMMANDS = {
    "train": cmd_train,
    "bounds": cmd_bounds,
    "model-select": cmd_model_select,
    "path": cmd_path,
    "loocv": cmd_loocv,
    "lasso-screen": cmd_lasso_screen,
    "lr-from-svm": cmd_lr_from_svm,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"regbounds: error: {e}", file=sys.stderr)
        return 2
    except (OSError, DataFormatError) as e:
        print(f"regbounds: error: {e}", file=sys.stderr)
        return 1
    except ConvergenceError as e:
        print(f"regbounds: error: {e} (residual {e.grad_norm:.3g})", file=sys.stderr)
        return 3
