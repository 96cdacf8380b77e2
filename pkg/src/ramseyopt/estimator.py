"""Parameter recovery from sampled data.

fit_least_squares minimizes the mean-square error between empirical means
and the model expectation with damped Gauss-Newton steps (analytic Jacobian)
and a simplex fallback on rank loss. invert_xy is the closed-form
two-quadrature single-time inversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import (DomainError, IndeterminateError, UnderDeterminedError)
from .sampler import SampleSet
from .signal import (Quadrature, RamseyModel, expectation,
                     expectation_gradient, free_parameters, with_values)

_MAX_ITER = 200
_STEP_TOL = 1e-12
_OBJ_TOL = 1e-16


@dataclass(frozen=True)
class EstimateResult:
    params: dict
    converged: bool
    objective: float          # final mean-square error
    iterations: int
    frozen: tuple

    def value(self, name: str) -> float:
        return self.params[name]

    def to_json(self) -> dict:
        return {"params": dict(self.params), "converged": self.converged,
                "objective": self.objective, "iterations": self.iterations,
                "frozen": list(self.frozen)}


def _clamped(names, theta):
    theta = np.array(theta, dtype=float)
    if "gamma" in names:
        i = names.index("gamma")
        theta[i] = max(theta[i], 0.0)
    return theta


def _by_quadrature(quads):
    return [(q, [i for i, qq in enumerate(quads) if qq is q])
            for q in (Quadrature.X, Quadrature.Y)
            if any(qq is q for qq in quads)]


def _predict(model, times, groups):
    out = np.empty(len(times))
    for q, idx in groups:
        out[idx] = expectation(model, q, times[idx])
    return out


def _jacobian(model, names, times, groups):
    out = np.empty((len(times), len(names)))
    for q, idx in groups:
        out[idx, :] = expectation_gradient(model, q, times[idx], names).T
    return out


def _mse(model, names, theta, times, groups, means):
    m = with_values(model, names, _clamped(names, theta))
    r = means - _predict(m, times, groups)
    return float(r @ r) / len(r)


def _gauss_newton(model, names, theta0, times, groups, means, max_iterations):
    """Levenberg-damped Gauss-Newton on the residual vector."""
    theta = _clamped(names, theta0)
    lam = 1e-3
    best_obj = _mse(model, names, theta, times, groups, means)
    iterations = 0
    converged = False
    for iterations in range(1, max_iterations + 1):
        m = with_values(model, names, theta)
        r = means - _predict(m, times, groups)
        jac = _jacobian(m, names, times, groups)
        if not np.isfinite(jac).all():
            return theta, best_obj, iterations, False, True
        jtj = jac.T @ jac
        jtr = jac.T @ r
        damped = jtj + lam * np.eye(len(names))
        cond = np.linalg.cond(damped)
        if not math.isfinite(cond) or cond > 1e14:
            return theta, best_obj, iterations, False, True
        step = np.linalg.solve(damped, jtr)
        trial = _clamped(names, theta + step)
        trial_obj = _mse(model, names, trial, times, groups, means)
        if trial_obj <= best_obj:
            improvement = best_obj - trial_obj
            theta, best_obj = trial, trial_obj
            lam = max(lam / 3.0, 1e-12)
            if np.abs(step).max() < _STEP_TOL or improvement < _OBJ_TOL:
                converged = True
                break
        else:
            lam *= 3.0
            if lam > 1e10:
                converged = np.abs(step).max() < 1e-8
                break
    return theta, best_obj, iterations, converged, False


def _simplex(model, names, theta0, times, groups, means, max_iterations):
    res = minimize(lambda th: _mse(model, names, th, times, groups, means),
                   theta0, method="Nelder-Mead",
                   options=dict(xatol=1e-12, fatol=1e-16,
                                maxiter=max_iterations, maxfev=max_iterations))
    theta = _clamped(names, res.x)
    return theta, float(res.fun), int(res.nit), bool(res.success)


def fit_least_squares(init: RamseyModel, data: SampleSet,
                      frozen: tuple = (),
                      max_iterations: int = _MAX_ITER) -> EstimateResult:
    """Fit the free parameters of init's model family to the sample means.

    init doubles as the starting guess; parameters named in frozen are held
    at their init values. When omega is free and the data contain no Y
    records the sign of omega is not identifiable, so both signs are tried
    and the magnitude is reported.
    """
    return fit_points(init,
                      [r.time for r in data.records],
                      [r.quadrature for r in data.records],
                      [r.empirical_mean for r in data.records],
                      frozen=frozen, max_iterations=max_iterations)


def fit_points(init: RamseyModel, times, quadratures, means,
               frozen: tuple = (),
               max_iterations: int = _MAX_ITER) -> EstimateResult:
    """fit_least_squares on bare arrays; accepts exact (unquantized) means."""
    frozen = tuple(frozen)
    all_names = free_parameters(init)
    unknown = [f for f in frozen if f not in all_names]
    if unknown:
        raise DomainError(f"cannot freeze {unknown}; model has {all_names}")
    names = [n for n in all_names if n not in frozen]
    if not names:
        raise DomainError("all parameters frozen; nothing to fit")
    if not np.isfinite([init.value(n) for n in all_names]).all():
        raise DomainError("init parameters must be finite")
    if len(times) < len(names):
        raise UnderDeterminedError(
            f"{len(names)} free parameters but only {len(times)} entries")

    times = np.asarray(times, dtype=float)
    quads = list(quadratures)
    groups = _by_quadrature(quads)
    means = np.asarray(means, dtype=float)

    theta0 = np.array([init.value(n) for n in names])
    x_only = all(q is Quadrature.X for q in quads)
    starts = [theta0]
    if "omega" in names and x_only and theta0[names.index("omega")] != 0:
        flipped = theta0.copy()
        flipped[names.index("omega")] *= -1
        starts.append(flipped)

    best = None
    total_iter = 0
    for start in starts:
        theta, obj, iters, converged, rank_loss = _gauss_newton(
            init, names, start, times, groups, means, max_iterations)
        total_iter += iters
        if rank_loss:
            theta, obj, iters, converged = _simplex(
                init, names, theta, times, groups, means, max_iterations * 10)
            total_iter += iters
        if best is None or obj < best[1]:
            best = (theta, obj, converged)

    theta, obj, converged = best
    params = dict(zip(names, _clamped(names, theta)))
    if "omega" in params and x_only:
        params["omega"] = abs(params["omega"])
    for f in frozen:
        params[f] = init.value(f)
    return EstimateResult(params={k: float(v) for k, v in params.items()},
                          converged=converged, objective=obj,
                          iterations=total_iter, frozen=frozen)


@dataclass(frozen=True)
class XyEstimate:
    omega: float
    gamma: float
    clamped: bool   # true when noise pushed the Bloch length past 1


def invert_xy(x_mean: float, y_mean: float, t: float,
              omega_prior: float | None = None) -> XyEstimate:
    """Closed-form (omega, gamma) from one X mean and one Y mean at time t.

    The phase lands on the principal branch unless omega_prior is given, in
    which case the branch nearest the prior wins (needed once
    |omega_prior * t| >= pi).
    """
    if t <= 0:
        raise DomainError("invert_xy needs t > 0")
    r = math.hypot(x_mean, y_mean)
    if r == 0:
        raise IndeterminateError("zero Bloch projection; phase undefined")
    theta = math.atan2(y_mean, x_mean)
    if omega_prior is not None:
        k = round((omega_prior * t - theta) / (2 * math.pi))
        theta += 2 * math.pi * k
    omega = theta / t
    if r > 1:
        return XyEstimate(omega=omega, gamma=0.0, clamped=True)
    return XyEstimate(omega=omega, gamma=-math.log(r) / t, clamped=False)
