import math

import numpy as np
import pytest

from regbounds.bounds import validation_error_count
from regbounds.data import Dataset, KernelSpec
from regbounds.losses import HINGE, LOGISTIC
from regbounds.selection import (
    CandidateGrid,
    choose_next,
    epsilon_path,
    exhaustive_errors,
    fast_loocv,
    log_grid,
    lr_inference_from_svm,
    naive_loocv,
    select_model,
)
from regbounds.synthetic import two_gaussians
from regbounds.trainer import train

from conftest import logistic_oracle


def test_log_grid():
    g = log_grid(0.01, 10000, 501)
    assert g.size == 501 and g[0] == 0.01 and g[-1] == 10000
    assert np.allclose(np.diff(np.log10(g)), 6 / 500)
    assert log_grid(3.0, 1.0, 1).tolist() == [3.0]
    with pytest.raises(ValueError):
        log_grid(1.0, 1.0, 5)
    with pytest.raises(ValueError):
        log_grid(0.0, 1.0, 5)


def test_candidate_grid_validation():
    with pytest.raises(ValueError):
        CandidateGrid(np.array([]), 3)
    with pytest.raises(ValueError):
        CandidateGrid(np.array([2.0, 1.0]), 3)


def test_choose_next_argmin_and_ties():
    g = CandidateGrid(np.array([1.0, 2.0, 3.0]), 10)
    g.lo[:] = [1, 3, 1]
    assert choose_next(g) == 0
    g.solved[0] = True
    assert choose_next(g) == 2
    g.lo[:] = [0, 2, 2]
    g.solved[:] = [True, False, False]
    assert choose_next(g) == 1
    g.solved[:] = True
    with pytest.raises(ValueError):
        choose_next(g)


@pytest.fixture(scope="module")
def split_data():
    return two_gaussians(60, 3, 1.5, seed=21), two_gaussians(60, 3, 1.5, seed=22)


def test_single_candidate(split_data):
    tr, va = split_data
    res = select_model(tr, va, KernelSpec(), LOGISTIC, [0.5])
    assert res.trained_count == 1 and res.best_C == 0.5


def test_identical_candidates_train_once(split_data):
    tr, va = split_data
    res = select_model(tr, va, KernelSpec(), LOGISTIC, [0.7] * 5)
    assert res.trained_count == 1
    assert np.all(res.grid.lo == res.grid.hi)


@pytest.mark.parametrize("kernel", [KernelSpec(), KernelSpec.rbf(0.5)])
@pytest.mark.parametrize("loss", [LOGISTIC, HINGE])
def test_select_matches_exhaustive(split_data, kernel, loss):
    tr, va = split_data
    grid = log_grid(0.01, 100, 41)
    res = select_model(tr, va, kernel, loss, grid)
    ex = exhaustive_errors(tr, va, kernel, loss, grid)
    assert res.grid.errors[res.best_index] == ex.min()
    assert validation_error_count(res.best, va) == ex.min()
    solved = res.grid.solved
    assert np.array_equal(res.grid.errors[solved], ex[solved])
    # final bounds sandwich the exhaustive answer everywhere
    assert np.all(res.grid.lo <= ex) and np.all(ex <= res.grid.hi)


def test_bound_history_is_monotone(split_data):
    tr, va = split_data
    res = select_model(tr, va, KernelSpec(), LOGISTIC, log_grid(0.01, 100, 31))
    last = {}
    for h in res.history:
        t = h["index"]
        if t in last:
            assert h["err_lo"] >= last[t][0] and h["err_hi"] <= last[t][1]
        last[t] = (h["err_lo"], h["err_hi"])
    d = res.to_dict()
    assert d["trained_count"] == res.trained_count and d["T"] == 31


def test_epsilon_one_trains_once(split_data):
    tr, va = split_data
    rep = epsilon_path(tr, va, KernelSpec(), LOGISTIC, 0.01, 100, 1.0)
    assert rep.trained_count == 1
    assert math.isinf(rep.points[0].next_C)


def test_single_validation_instance_path(split_data):
    tr, _ = split_data
    va = Dataset.from_dense([[0.8, -0.3, 0.1]], [1.0])
    rep = epsilon_path(tr, va, KernelSpec(), LOGISTIC, 0.01, 100, 0.0)
    x = va.dense[0]
    from regbounds.bounds import sign_stability_interval

    for p in rep.points:
        st = sign_stability_interval(train(tr, KernelSpec(), LOGISTIC, p.C), x)
        assert p.next_C == pytest.approx(st.c_hi, rel=1e-9) or p.gap


def test_path_preconditions(split_data):
    tr, va = split_data
    with pytest.raises(ValueError):
        epsilon_path(tr, va, KernelSpec(), LOGISTIC, 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        epsilon_path(tr, va, KernelSpec(), LOGISTIC, 0.1, 1.0, 1.5)


def test_path_report_lookup(split_data):
    tr, va = split_data
    rep = epsilon_path(tr, va, KernelSpec(), LOGISTIC, 0.01, 10, 0.05)
    assert rep.point_for(0.01) is rep.points[0]
    with pytest.raises(ValueError):
        rep.point_for(100.0)
    assert rep.to_dict()["trained_count"] == rep.trained_count


@pytest.mark.parametrize("loss", [LOGISTIC, HINGE])
def test_fast_loocv_matches_naive(loss):
    ds = two_gaussians(30, 2, 1.0, seed=31)
    for C in (0.01, 1.0):
        fast = fast_loocv(ds, KernelSpec(), loss, C)
        naive, values = naive_loocv(ds, KernelSpec(), loss, C)
        assert fast.loocv_error == naive
        assert fast.solved_count + fast.skipped_count == ds.n
        sk = fast.skipped
        assert np.all(np.sign(values[sk]) == np.where(fast.lo[sk] > 0, 1, -1))
        assert np.all((fast.lo <= values + 1e-8) & (values <= fast.hi + 1e-8))


def test_fast_loocv_two_points():
    ds = Dataset.from_dense([[1.0, 0.0], [-1.0, 0.0]], [1.0, -1.0])
    res = fast_loocv(ds, KernelSpec(), LOGISTIC, 1.0)
    assert res.loocv_error in (0.0, 0.5, 1.0)
    assert res.solved_count + res.skipped_count == 2
    with pytest.raises(ValueError):
        fast_loocv(ds.subset([0]), KernelSpec(), LOGISTIC, 1.0)


def test_loocv_skips_more_at_small_c():
    ds = two_gaussians(60, 3, 1.0, seed=32)
    small = fast_loocv(ds, KernelSpec(), LOGISTIC, 0.01)
    big = fast_loocv(ds, KernelSpec(), LOGISTIC, 10.0)
    assert small.skipped_count / ds.n > 0.5
    assert small.skipped_count >= big.skipped_count


def test_lr_inference_contains_oracle():
    ds = two_gaussians(60, 4, 1.5, seed=41)
    C = 0.5
    x_new = np.random.default_rng(0).normal(size=(5, 4))
    res = lr_inference_from_svm(ds, C, x_new=x_new)
    ref = logistic_oracle(ds.dense, ds.y, C)
    for j, (s, r) in enumerate(zip(res.coef_single, res.coef_refined)):
        assert s.contains(ref[j], 1e-7) and r.contains(ref[j], 1e-7)
        assert r.within(s, 1e-12)
    for x, s, r in zip(x_new, res.logodds_single, res.logodds_refined):
        assert s.contains(x @ ref, 1e-7) and r.contains(x @ ref, 1e-7)
        assert r.within(s, 1e-12)
    assert len(res.to_dict()["coefficients"]) == 4


def test_lr_inference_exact_when_seed_is_the_lr_optimum():
    ds = two_gaussians(40, 3, 1.0, seed=42)
    lr = train(ds, KernelSpec(), LOGISTIC, 1.0)
    res = lr_inference_from_svm(ds, 1.0, w_tilde=lr.w)
    assert res.radius <= 1e-10
    for j, iv in enumerate(res.coef_single):
        assert iv.width <= 1e-9
        assert iv.contains(lr.w.values[j], 1e-9)


def test_lr_inference_needs_linear_kernel():
    ds = two_gaussians(10, 2)
    with pytest.raises(ValueError):
        lr_inference_from_svm(ds, 1.0, kernel=KernelSpec.rbf(1.0))
