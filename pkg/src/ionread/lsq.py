"""Weighted nonlinear least squares by damped Gauss-Newton (Levenberg damping)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass
class LsqResult:
    params: np.ndarray
    covariance: np.ndarray
    chi2: float
    residuals: np.ndarray
    iterations: int
    converged: bool

    @property
    def errors(self):
        return np.sqrt(np.diag(self.covariance))


def numeric_jacobian(fun, x, rel_step=1e-6):
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1e-12)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h)
    return jac


def fit(model, x0, xdata, ydata, sigma, xtol=1e-10, max_iter=200, lam0=1e-3):
    """Minimise sum(((ydata - model(xdata, p)) / sigma)**2) over p.

    Stops when the relative parameter step drops below ``xtol``.  Raises
    ConvergenceError after ``max_iter`` iterations or if the damping runs
    away; the diagnostics carry the last parameters and residuals.
    """
    xdata = np.asarray(xdata, dtype=float)
    ydata = np.asarray(ydata, dtype=float)
    sigma = np.asarray(sigma, dtype=float)

    def resid(p):
        return (ydata - model(xdata, p)) / sigma

    p = np.asarray(x0, dtype=float).copy()
    r = resid(p)
    cost = float(r @ r)
    lam = lam0
    for it in range(1, max_iter + 1):
        # residuals are y - f, so the Jacobian of r is -J_f
        jac = -numeric_jacobian(lambda q: model(xdata, q) / sigma, p)
        a = jac.T @ jac
        g = jac.T @ r
        while True:
            damped = a + lam * np.diag(np.diag(a))
            try:
                step = np.linalg.solve(damped, -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(damped, -g, rcond=None)[0]
            small = np.all(np.abs(step) <= xtol * np.maximum(np.abs(p), 1e-300))
            trial = p + step
            r_trial = resid(trial)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                p, r, cost = trial, r_trial, cost_trial
                lam = max(lam / 10.0, 1e-12)
                break
            if small:
                break
            lam *= 10.0
            if lam > 1e16:
                raise ConvergenceError("damping diverged", {"params": p.tolist(),
                                                            "residuals": r.tolist(),
                                                            "iterations": it})
        if small:
            jac = -numeric_jacobian(lambda q: model(xdata, q) / sigma, p)
            try:
                cov = np.linalg.inv(jac.T @ jac)
            except np.linalg.LinAlgError as exc:
                raise ConvergenceError("singular normal matrix at the solution",
                                       {"params": p.tolist()}) from exc
            return LsqResult(params=p, covariance=cov, chi2=cost, residuals=r,
                             iterations=it, converged=True)
    raise ConvergenceError(f"no convergence in {max_iter} iterations",
                           {"params": p.tolist(), "residuals": r.tolist(),
                            "iterations": max_iter})
