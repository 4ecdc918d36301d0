import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regbounds.bounds import (
    CBoundCurve,
    ball_from_model,
    ball_from_suboptimal,
    cbound_curve,
    cbound_curves,
    error_bounds,
    sign_stability_interval,
    sign_stability_limits,
    validation_bounds,
    validation_error,
)
from regbounds.data import Dataset, KernelSpec
from regbounds.geometry import Ball, PrimalDense, bound_inner, inner, norm
from regbounds.losses import HINGE, LOGISTIC
from regbounds.synthetic import two_gaussians
from regbounds.trainer import SolverConfig, train

from conftest import random_theta, random_vector


def test_ball_single_instance():
    ds = Dataset.from_dense([[1.0, 0.0]], [1.0])
    b = ball_from_suboptimal(PrimalDense(np.zeros(2)), ds, KernelSpec(), LOGISTIC, 1.0)
    np.testing.assert_array_equal(b.center.values, [0.25, 0])
    assert b.radius == 0.25


def test_ball_scales_linearly_in_c_at_zero():
    ds = two_gaussians(10, 3, seed=1)
    zero = PrimalDense(np.zeros(3))
    b1 = ball_from_suboptimal(zero, ds, KernelSpec(), LOGISTIC, 1.0)
    b2 = ball_from_suboptimal(zero, ds, KernelSpec(), LOGISTIC, 2.0)
    assert norm(b2.center) == pytest.approx(2 * norm(b1.center), rel=1e-15)
    assert b2.radius == pytest.approx(2 * b1.radius, rel=1e-15)


def test_ball_at_optimum_is_tiny():
    ds = two_gaussians(50, 4, seed=2)
    m = train(ds, KernelSpec(), LOGISTIC, 1.0, SolverConfig(tolerance=1e-12))
    assert ball_from_suboptimal(m.w, ds, KernelSpec(), LOGISTIC, 1.0).radius <= 1e-10


def test_ball_rejects_bad_c():
    ds = two_gaussians(5, 2)
    with pytest.raises(ValueError):
        ball_from_suboptimal(PrimalDense(np.zeros(2)), ds, KernelSpec(), LOGISTIC, 0.0)


@pytest.mark.parametrize("kernel", [KernelSpec(), KernelSpec.rbf(0.4)])
@pytest.mark.parametrize("loss", [LOGISTIC, HINGE])
def test_suboptimal_ball_containment(kernel, loss):
    rng = np.random.default_rng(3)
    ds = two_gaussians(30, 3, seed=3)
    for C in (0.05, 1.0, 20.0):
        opt = train(ds, kernel, loss, C).w
        for _ in range(5):
            ball = ball_from_suboptimal(random_vector(rng, ds, kernel, 2.0), ds, kernel, loss, C)
            for _ in range(20):
                th = random_theta(rng, ds, kernel)
                assert bound_inner(ball, th).contains(inner(th, opt), 1e-8)


def test_curve_examples():
    ds = two_gaussians(40, 3, seed=4)
    m = train(ds, KernelSpec(), LOGISTIC, 1.0)
    curve = cbound_curve(m, m.w)
    assert curve.b_lo(3.0)[0] == pytest.approx(m.w.sqnorm, rel=1e-12)
    th = PrimalDense(np.array([0.3, -1.0, 2.0]))
    c = cbound_curve(m, th)
    iv = c.interval(1.0)
    assert iv.lo == iv.hi == inner(th, m.w)
    with pytest.raises(ValueError):
        c.evaluate(0.0)


@pytest.mark.parametrize("kernel", [KernelSpec(), KernelSpec.rbf(0.4)])
@pytest.mark.parametrize("loss", [LOGISTIC, HINGE])
def test_c_curve_containment(kernel, loss):
    rng = np.random.default_rng(5)
    ds = two_gaussians(30, 3, seed=5)
    ref = train(ds, kernel, loss, 1.0)
    for C in (0.02, 0.5, 2.0, 50.0):
        opt = train(ds, kernel, loss, C).w
        for _ in range(20):
            th = random_theta(rng, ds, kernel)
            assert cbound_curve(ref, th).interval(C).contains(inner(th, opt), 1e-8)


def test_curve_agrees_with_model_ball():
    ds = two_gaussians(30, 3, seed=6)
    ref = train(ds, KernelSpec(), HINGE, 1.0)
    th = PrimalDense(np.array([1.0, 0.5, -0.2]))
    for C in (0.1, 4.0):
        a = cbound_curve(ref, th).interval(C)
        b = bound_inner(ball_from_model(ref, C), th)
        assert a.lo == pytest.approx(b.lo, abs=1e-12) and a.hi == pytest.approx(b.hi, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-10, 10),
    st.floats(0, 10),
    st.floats(0.01, 100),
    st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=20),
)
def test_curve_monotone_and_ordered(v, extra, c_ref, cs):
    curve = CBoundCurve(c_ref, np.array([v]), np.array([abs(v) + extra]))
    for C in cs:
        lo, hi = curve.evaluate(C)
        assert lo[0] <= hi[0]
    above = sorted(c for c in cs if c > c_ref)
    below = sorted(c for c in cs if c < c_ref)
    for a, b in zip(above, above[1:]):
        assert curve.b_lo(b)[0] <= curve.b_lo(a)[0] and curve.b_up(b)[0] >= curve.b_up(a)[0]
    for a, b in zip(below, below[1:]):
        assert curve.b_lo(b)[0] >= curve.b_lo(a)[0] and curve.b_up(b)[0] <= curve.b_up(a)[0]


def test_error_bounds_counting():
    y = np.array([1.0, -1.0, 1.0, -1.0])
    lo = np.array([0.5, -2.0, -3.0, -1.0])
    hi = np.array([1.0, -1.0, -1.0, 1.0])
    vb = error_bounds(lo, hi, y)
    assert (vb.error_lo, vb.error_hi) == (0.25, 0.5)
    assert vb.undetermined == 1
    vb = error_bounds(-np.ones(4), np.ones(4), y)
    assert (vb.error_lo, vb.error_hi) == (0.0, 1.0)
    with pytest.raises(ValueError):
        error_bounds(np.array([]), np.array([]), np.array([]))


def test_touching_zero_is_undetermined():
    vb = error_bounds(np.array([0.0]), np.array([1.0]), np.array([1.0]))
    assert vb.certain_correct == 0


def test_exact_ball_gives_exact_error():
    tr = two_gaussians(40, 3, seed=7)
    va = two_gaussians(40, 3, seed=8)
    m = train(tr, KernelSpec(), LOGISTIC, 1.0)
    vb = validation_bounds(Ball(m.w, 0.0), va, KernelSpec())
    assert vb.error_lo == vb.error_hi == validation_error(m, va)
    vb2 = validation_bounds(m, va)
    assert vb2.error_lo == vb2.error_hi == validation_error(m, va)
    with pytest.raises(TypeError):
        validation_bounds(object(), va)


def test_validation_bounds_sandwich_oracle_errors():
    tr = two_gaussians(40, 3, seed=9)
    va = two_gaussians(60, 3, seed=10)
    ref = train(tr, KernelSpec(), LOGISTIC, 1.0)
    curves = cbound_curves(ref, va)
    for C in np.logspace(-2, 2, 25):
        vb = validation_bounds(curves, va, C=C)
        err = validation_error(train(tr, KernelSpec(), LOGISTIC, C), va)
        assert vb.error_lo <= err <= vb.error_hi


def test_sign_stability_examples():
    s, lo, hi = sign_stability_limits(0.6, 1.0, 1.0)
    assert s == 1 and hi == pytest.approx(4.0) and lo == pytest.approx(0.25)
    s, lo, hi = sign_stability_limits(-0.5, 0.5, 2.0)
    assert s == -1 and math.isinf(hi) and lo == 0.0
    s, lo, hi = sign_stability_limits(0.0, 1.0, 2.0)
    assert s == 0 and lo == hi == 2.0


def test_sign_stability_against_retraining():
    tr = two_gaussians(40, 3, seed=11)
    m = train(tr, KernelSpec(), LOGISTIC, 1.0)
    rng = np.random.default_rng(12)
    for _ in range(10):
        x = rng.normal(size=3)
        st_ = sign_stability_interval(m, x)
        assert st_.sign == np.sign(x @ m.w.values)
        for C in (st_.c_lo * 1.0001, min(st_.c_hi * 0.9999, 1e6)):
            w = train(tr, KernelSpec(), LOGISTIC, C).w.values
            assert np.sign(x @ w) == st_.sign


def test_radius_shrinks_toward_optimum():
    ds = two_gaussians(40, 3, seed=13)
    k = KernelSpec()
    opt = train(ds, k, LOGISTIC, 2.0).w.values
    start = opt + np.array([1.0, -2.0, 0.5])
    radii = [
        ball_from_suboptimal(PrimalDense(opt + t * (start - opt)), ds, k, LOGISTIC, 2.0).radius
        for t in (1.0, 0.3, 0.1, 0.03, 0.01, 0.0)
    ]
    assert all(a >= b for a, b in zip(radii, radii[1:]))
    assert radii[-1] <= 1e-10
