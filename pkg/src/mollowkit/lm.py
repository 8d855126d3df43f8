"""Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Small and dense: the models here have at most a handful of parameters.
Jacobians are forward differences unless an analytic one is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = np.finfo(float).eps


@dataclass
class LMResult:
    x: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray
    cost: float
    grad_norm: float
    n_iterations: int
    n_evaluations: int
    converged: bool
    message: str
    history: list[float] = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return float(np.sqrt(2 * self.cost))


def forward_jacobian(fun, x, r0, lower, upper, rel_step=None):
    """Forward-difference Jacobian of ``fun`` at ``x``; steps point into bounds."""
    rel_step = np.sqrt(_EPS) if rel_step is None else rel_step
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1e-8)
        if x[i] + h > upper[i]:
            h = -h
        xp = x.copy()
        xp[i] += h
        jac[:, i] = (fun(xp) - r0) / (xp[i] - x[i])
    return jac


def gradient_cosine(jac: np.ndarray, r: np.ndarray, free=None) -> float:
    """max_i |J_i . r| / (|J_i| |r|) over the ``free`` components.

    Zero at a least-squares stationary point.  Components pinned at a bound
    with the gradient pointing outward are left out via ``free``.
    """
    rn = np.linalg.norm(r)
    if rn == 0:
        return 0.0
    cn = np.linalg.norm(jac, axis=0)
    cn[cn == 0] = np.inf
    c = np.abs(jac.T @ r) / (cn * rn)
    if free is not None:
        c = c[free]
    return float(np.max(c)) if c.size else 0.0


def _free(x, g, lower, upper):
    """Components not held at a bound by the descent direction -g."""
    at_lo = (x <= lower) & (g > 0)
    at_hi = (x >= upper) & (g < 0)
    return ~(at_lo | at_hi)


def levenberg_marquardt(
    fun,
    x0,
    jac=None,
    lower=None,
    upper=None,
    max_iter: int = 200,
    gtol: float = 1e-8,
    xtol: float = 1e-10,
    ftol: float = 1e-12,
    converged_gtol: float = 1e-4,
) -> LMResult:
    """Minimize 0.5 * |fun(x)|**2.

    Bounds are enforced by projecting trial points.  Only steps that lower
    the cost are accepted, so ``history`` is non-increasing.  Components held
    at a bound by the gradient are frozen for the iteration.  The result is
    flagged converged when the gradient cosine over the remaining components
    is below ``converged_gtol`` or the residual vanishes.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    x = np.clip(x, lower, upper)

    def jacobian(x, r):
        if jac is not None:
            return np.asarray(jac(x), dtype=float)
        return forward_jacobian(fun, x, r, lower, upper)

    r = np.asarray(fun(x), dtype=float)
    nfev = 1
    cost = 0.5 * float(r @ r)
    cost0 = cost
    history = [cost]
    J = jacobian(x, r)
    nfev += n
    lam = None
    nu = 2.0
    message = "maximum iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-30 * max(np.max(np.diag(A)), 1e-300))
        if lam is None:
            lam = 1e-3
        free = _free(x, g, lower, upper)
        if gradient_cosine(J, r, free) < gtol:
            message = "gradient tolerance reached"
            break
        # pinned components stay on their bound for this iteration
        Af = A[np.ix_(free, free)]
        accepted = False
        while not accepted:
            step = np.zeros(n)
            try:
                step[free] = np.linalg.solve(Af + lam * np.diag(diag[free]), -g[free])
            except np.linalg.LinAlgError:
                lam *= nu
                nu *= 2
                continue
            x_new = np.clip(x + step, lower, upper)
            actual = x_new - x
            r_new = np.asarray(fun(x_new), dtype=float)
            nfev += 1
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                accepted = True
                predicted = -(g @ actual) - 0.5 * actual @ A @ actual
                rho = (cost - cost_new) / predicted if predicted > 0 else 0.0
                lam *= max(1 / 3, 1 - (2 * rho - 1) ** 3) if rho > 0 else 1.0
                nu = 2.0
            else:
                lam *= nu
                nu *= 2
                if lam > 1e16 or np.linalg.norm(actual) <= xtol * (np.linalg.norm(x) + xtol):
                    break
        if not accepted:
            message = "no further decrease possible"
            break
        rel_drop = (cost - cost_new) / max(cost, 1e-300)
        small_step = np.linalg.norm(actual) <= xtol * (np.linalg.norm(x) + xtol)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        J = jacobian(x, r)
        nfev += n
        if cost <= 1e-28 * max(cost0, 1e-300):
            message = "residual vanished"
            break
        if small_step:
            message = "step tolerance reached"
            break
        if rel_drop < ftol:
            message = "cost tolerance reached"
            break

    gcos = gradient_cosine(J, r, _free(x, J.T @ r, lower, upper))
    vanished = cost <= 1e-24 * max(cost0, 1e-300)
    converged = bool(vanished or gcos < converged_gtol)
    return LMResult(
        x=x,
        residuals=r,
        jacobian=J,
        cost=cost,
        grad_norm=gcos,
        n_iterations=it,
        n_evaluations=nfev,
        converged=converged,
        message=message,
        history=history,
    )


def covariance(jac: np.ndarray, residuals: np.ndarray, absolute_sigma: bool, rcond=1e-10):
    """Parameter covariance, or None when the Jacobian is rank deficient.

    With ``absolute_sigma`` the residuals are taken to be normalized by true
    standard deviations; otherwise the covariance is scaled by the reduced
    chi-square.
    """
    m, n = jac.shape
    # column scaling keeps the rank test independent of parameter units
    scale = np.linalg.norm(jac, axis=0)
    if np.any(scale == 0):
        return None
    js = jac / scale
    u, s, vt = np.linalg.svd(js, full_matrices=False)
    if s[-1] <= rcond * s[0]:
        return None
    cov = (vt.T / s**2) @ vt
    cov = cov / np.outer(scale, scale)
    if not absolute_sigma:
        dof = m - n
        if dof <= 0:
            return None
        cov = cov * float(residuals @ residuals) / dof
    return cov
