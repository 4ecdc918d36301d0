import numpy as np
import pytest
from scipy.optimize import minimize

from regbounds.data import Dataset, KernelSpec
from regbounds.geometry import DualSpan, PrimalDense

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_vector(rng, ds: Dataset, kernel: KernelSpec, scale: float = 1.0):
    """Random feature-space vector in the representation the kernel needs."""
    if kernel.linear:
        return PrimalDense(scale * rng.normal(size=ds.d))
    return DualSpan(scale * rng.normal(size=ds.n) / np.sqrt(ds.n), ds.dense, kernel, ds.gram(kernel))


def random_theta(rng, ds: Dataset, kernel: KernelSpec):
    """A validation-style feature map phi(x) of a fresh random input."""
    x = rng.normal(size=ds.d)
    if kernel.linear:
        return PrimalDense(x)
    from regbounds.geometry import point

    return point(x, kernel)


def lens_oracle(m1, r1, m2, r2, theta, sense):
    """Extreme of theta.w over the intersection of two Euclidean balls, by SLSQP."""
    cons = [
        {"type": "ineq", "fun": lambda w, m=m, r=r: r * r - np.sum((w - m) ** 2), "jac": lambda w, m=m: -2.0 * (w - m)}
        for m, r in ((m1, r1), (m2, r2))
    ]
    x0 = (m1 * r2 + m2 * r1) / (r1 + r2)
    res = minimize(
        lambda w: -sense * theta @ w,
        x0,
        jac=lambda w: -sense * theta,
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    return float(theta @ res.x)


def logistic_oracle(X, y, C):
    """Independent L2 logistic regression solve (scipy L-BFGS-B on the primal)."""
    from scipy.special import expit

    def f(w):
        m = y * (X @ w)
        val = 0.5 * w @ w + C * np.sum(np.logaddexp(0.0, -m))
        grad = w - C * X.T @ (y * expit(-m))
        return val, grad

    res = minimize(f, np.zeros(X.shape[1]), jac=True, method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 0, "maxiter": 10000})
    return res.x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
