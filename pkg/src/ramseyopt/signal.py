"""Closed-form Ramsey signal models and their analytic parameter gradients.

Three model families cover every signal used in the package:

* TwoParam      <X(t)> = cos(omega t) e^{-gamma t},  <Y(t)> = sin(omega t) e^{-gamma t}
* FiveParam     A cos(omega t + phi) e^{-gamma t} + B   (sin on the Y quadrature)
* PureDecay     A e^{-gamma t}  (quadrature-independent exponential reference)

All functions accept scalar or ndarray time arguments and are pure.
Parameters are dimensionless: times and rates enter only as products.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError

# Canonical parameter order used whenever a caller does not choose one.
# Fisher-matrix row/column labels follow this ordering across the package.
PARAM_ORDER = ("omega", "gamma", "A", "B", "phi")


class Quadrature(enum.Enum):
    X = "X"
    Y = "Y"

    def __str__(self):
        return self.value


def _check_finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class QubitParams:
    """Detuning and dephasing rate of a single qubit.

    omega may be negative (sign carries physical meaning); gamma may not.
    """

    omega: float
    gamma: float

    def __post_init__(self):
        _check_finite("omega", self.omega)
        _check_finite("gamma", self.gamma)
        if self.gamma < 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class TwoParam:
    """Plain Ramsey oscillation with unit amplitude and no offset."""

    params: QubitParams

    @property
    def free_names(self):
        return ("omega", "gamma")

    def value(self, name):
        return getattr(self.params, name)


@dataclass(frozen=True)
class FiveParam:
    """Damped oscillation with amplitude, offset and phase fit freedoms."""

    A: float
    B: float
    phi: float
    params: QubitParams

    def __post_init__(self):
        for n in ("A", "B", "phi"):
            _check_finite(n, getattr(self, n))

    @property
    def free_names(self):
        return ("omega", "gamma", "A", "B", "phi")

    def value(self, name):
        if name in ("A", "B", "phi"):
            return getattr(self, name)
        return getattr(self.params, name)


@dataclass(frozen=True)
class PureDecay:
    """Exponential decay with no oscillation; both quadratures read the
    same envelope."""

    A: float
    gamma: float

    def __post_init__(self):
        _check_finite("A", self.A)
        _check_finite("gamma", self.gamma)
        if self.gamma < 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def free_names(self):
        # canonical order puts gamma before A
        return ("gamma", "A")

    def value(self, name):
        return getattr(self, name)


RamseyModel = Union[TwoParam, FiveParam, PureDecay]


def free_parameters(model: RamseyModel) -> tuple:
    """Model's full free-parameter name tuple in canonical order."""
    return model.free_names


def signal_bound(model: RamseyModel) -> float:
    """Largest possible |expectation| over all t >= 0."""
    if isinstance(model, TwoParam):
        return 1.0
    if isinstance(model, FiveParam):
        return abs(model.A) + abs(model.B)
    return abs(model.A)


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("negative evolution time")
    return t


def expectation(model: RamseyModel, quad: Quadrature, t):
    """Expectation value of the chosen quadrature at time(s) t.

    Returns a scalar for scalar input, an ndarray otherwise.
    """
    tt = _times(t)
    if isinstance(model, TwoParam):
        w, g = model.params.omega, model.params.gamma
        osc = np.cos(w * tt) if quad is Quadrature.X else np.sin(w * tt)
        out = osc * np.exp(-g * tt)
    elif isinstance(model, FiveParam):
        w, g = model.params.omega, model.params.gamma
        th = w * tt + model.phi
        osc = np.cos(th) if quad is Quadrature.X else np.sin(th)
        out = model.A * osc * np.exp(-g * tt) + model.B
    elif isinstance(model, PureDecay):
        out = model.A * np.exp(-model.gamma * tt)
    else:
        raise DomainError(f"unknown model type {type(model).__name__}")
    return out if out.ndim else float(out)


def expectation_gradient(model: RamseyModel, quad: Quadrature, t,
                         free_params: Sequence[str] | None = None):
    """Analytic partials of expectation() w.r.t. the requested parameters.

    Components come back in the caller's order; free_params defaults to the
    model's canonical tuple. Shape is (p,) for scalar t, (p, n) for array t.
    """
    names = tuple(free_params) if free_params is not None else model.free_names
    for n in names:
        if n not in model.free_names:
            raise DomainError(
                f"{type(model).__name__} has no parameter {n!r}; "
                f"valid names: {model.free_names}")
    tt = _times(t)
    scalar = tt.ndim == 0
    tt = np.atleast_1d(tt)

    if isinstance(model, TwoParam):
        w, g = model.params.omega, model.params.gamma
        env = np.exp(-g * tt)
        c, s = np.cos(w * tt), np.sin(w * tt)
        if quad is Quadrature.X:
            parts = {"omega": -tt * s * env, "gamma": -tt * c * env}
        else:
            parts = {"omega": tt * c * env, "gamma": -tt * s * env}
    elif isinstance(model, FiveParam):
        w, g = model.params.omega, model.params.gamma
        env = np.exp(-g * tt)
        th = w * tt + model.phi
        c, s = np.cos(th), np.sin(th)
        A = model.A
        if quad is Quadrature.X:
            parts = {
                "omega": -A * tt * s * env,
                "gamma": -A * tt * c * env,
                "A": c * env,
                "B": np.ones_like(tt),
                "phi": -A * s * env,
            }
        else:
            parts = {
                "omega": A * tt * c * env,
                "gamma": -A * tt * s * env,
                "A": s * env,
                "B": np.ones_like(tt),
                "phi": A * c * env,
            }
    else:  # PureDecay
        env = np.exp(-model.gamma * tt)
        parts = {"gamma": -model.A * tt * env, "A": env}

    grad = np.stack([parts[n] for n in names])
    return grad[:, 0] if scalar else grad


def with_values(model: RamseyModel, names: Sequence[str], values) -> RamseyModel:
    """Copy of model with the listed parameters replaced; used by fitters."""
    updates = dict(zip(names, values, strict=True))
    if isinstance(model, TwoParam):
        qp = QubitParams(
            omega=float(updates.pop("omega", model.params.omega)),
            gamma=float(updates.pop("gamma", model.params.gamma)))
        out: RamseyModel = TwoParam(qp)
    elif isinstance(model, FiveParam):
        qp = QubitParams(
            omega=float(updates.pop("omega", model.params.omega)),
            gamma=float(updates.pop("gamma", model.params.gamma)))
        out = FiveParam(A=float(updates.pop("A", model.A)),
                        B=float(updates.pop("B", model.B)),
                        phi=float(updates.pop("phi", model.phi)),
                        params=qp)
    elif isinstance(model, PureDecay):
        out = PureDecay(A=float(updates.pop("A", model.A)),
                        gamma=float(updates.pop("gamma", model.gamma)))
    else:
        raise DomainError(f"unknown model type {type(model).__name__}")
    if updates:
        raise DomainError(f"unknown parameters {sorted(updates)}")
    return out
