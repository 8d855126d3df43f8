import numpy as np
import pytest
from scipy.optimize import curve_fit, least_squares

from mollowkit.lm import covariance, gradient_cosine, levenberg_marquardt


def _exp_problem(seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 5, 60)
    y = 3.0 * np.exp(-x / 1.3) + 0.2 + rng.normal(0, 0.02, x.size)
    return x, y


def test_rosenbrock_converges():
    res = levenberg_marquardt(lambda p: np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]]), [-1.2, 1.0])
    assert res.converged
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-8)


def test_history_monotone():
    x, y = _exp_problem()
    res = levenberg_marquardt(lambda p: p[0] * np.exp(-x / p[1]) + p[2] - y, [1.0, 5.0, 0.0])
    assert np.all(np.diff(res.history) <= 0)
    assert res.history[-1] == pytest.approx(res.cost)


def test_matches_scipy_least_squares():
    x, y = _exp_problem(1)
    f = lambda p: p[0] * np.exp(-x / p[1]) + p[2] - y
    ours = levenberg_marquardt(f, [1.0, 5.0, 0.0])
    ref = least_squares(f, [1.0, 5.0, 0.0], method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14)
    assert np.allclose(ours.x, ref.x, rtol=1e-6)


def test_covariance_matches_curve_fit():
    x, y = _exp_problem(2)
    model = lambda x, a, t, c: a * np.exp(-x / t) + c
    popt, pcov = curve_fit(model, x, y, p0=[1.0, 5.0, 0.0])
    res = levenberg_marquardt(lambda p: model(x, *p) - y, [1.0, 5.0, 0.0])
    cov = covariance(res.jacobian, res.residuals, absolute_sigma=False)
    assert np.allclose(np.sqrt(np.diag(cov)), np.sqrt(np.diag(pcov)), rtol=1e-3)


def test_covariance_rank_deficient():
    jac = np.column_stack([np.ones(10), 2 * np.ones(10)])
    assert covariance(jac, np.zeros(10), True) is None
    jac = np.column_stack([np.ones(10), np.zeros(10)])
    assert covariance(jac, np.zeros(10), True) is None


def test_bounds_respected_and_converged_at_bound():
    x = np.linspace(0, 1, 20)
    y = 2.0 * x
    res = levenberg_marquardt(lambda p: p[0] * x - y, [0.5], lower=[0.0], upper=[1.0])
    assert res.x[0] == 1.0
    assert res.converged


def test_gradient_cosine_zero_at_solution():
    jac = np.eye(3)
    assert gradient_cosine(jac, np.zeros(3)) == 0.0
    assert gradient_cosine(jac, np.array([1.0, 0, 0])) == pytest.approx(1.0)
    assert gradient_cosine(jac, np.array([1.0, 0, 0]), free=np.array([False, True, True])) == 0.0


def test_not_converged_reported():
    x = np.linspace(0, 5, 60)
    f = lambda p: np.exp(-x / p[0]) * p[1] - np.exp(-x)
    res = levenberg_marquardt(f, [30.0, 0.1], max_iter=1)
    assert not res.converged
