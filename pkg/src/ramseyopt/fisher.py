"""Gaussian-approximation Fisher information and Cramér-Rao bounds.

For a plan of (time, quadrature, shots) entries the information matrix is

    I_jk = sum_entries (shots / sigma^2) * (df/dtheta_j) (df/dtheta_k)

with f the model expectation at that entry. sigma^2 is 1 per shot under
UnitShot and 1 - f^2 under Binomial (the true variance of a +/-1 outcome).
UnitShot is the package default; the gap between the two conventions is
real and intentional, callers choose per use case.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, NonIdentifiableError, SingularVarianceError
from .signal import (Quadrature, QubitParams, RamseyModel, expectation,
                     expectation_gradient, free_parameters)

CONDITION_LIMIT = 1e12
VARIANCE_FLOOR = 1e-9
# gradient magnitudes below this are treated as zero when deciding whether a
# vanishing binomial variance is fatal or ignorable
_GRAD_EPS = 1e-8


class VarianceModel(enum.Enum):
    UnitShot = "unit"
    Binomial = "binomial"


@dataclass(frozen=True)
class PlanEntry:
    time: float
    quadrature: Quadrature
    shots: int

    def __post_init__(self):
        if not math.isfinite(self.time) or self.time < 0:
            raise DomainError(f"entry time must be finite and >= 0, got {self.time}")
        if int(self.shots) != self.shots or self.shots < 1:
            raise DomainError(f"shots must be a positive integer, got {self.shots}")


@dataclass(frozen=True)
class MeasurementPlan:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise DomainError("measurement plan must be nonempty")

    @property
    def total_shots(self) -> int:
        return sum(e.shots for e in self.entries)

    @property
    def times(self):
        return np.array([e.time for e in self.entries])

    def scaled_shots(self, factor: float) -> "MeasurementPlan":
        """Same schedule with every shot count multiplied and re-rounded."""
        return MeasurementPlan(tuple(
            PlanEntry(e.time, e.quadrature, max(1, round(e.shots * factor)))
            for e in self.entries))


def plan(entries) -> MeasurementPlan:
    """Convenience builder from (time, quadrature, shots) triples."""
    return MeasurementPlan(tuple(
        PlanEntry(float(t), q if isinstance(q, Quadrature) else Quadrature(q), int(n))
        for t, q, n in entries))


@dataclass(frozen=True)
class FisherMatrix:
    labels: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.labels), len(self.labels)):
            raise DomainError("matrix shape does not match labels")
        if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise DomainError("information matrix must be symmetric")
        object.__setattr__(self, "matrix", (m + m.T) / 2.0)


@dataclass(frozen=True)
class CrbResult:
    labels: tuple
    per_param_variance_bound: np.ndarray = field(repr=False)
    trace_bound: float = 0.0

    def bound(self, name: str) -> float:
        return float(self.per_param_variance_bound[self.labels.index(name)])


def entry_variance(model: RamseyModel, entry: PlanEntry, vm: VarianceModel,
                   grad=None) -> float:
    """Per-shot variance for one plan entry under the chosen convention."""
    if vm is VarianceModel.UnitShot:
        return 1.0
    f = expectation(model, entry.quadrature, entry.time)
    v = 1.0 - f * f
    if v < VARIANCE_FLOOR:
        g = grad if grad is not None else expectation_gradient(
            model, entry.quadrature, entry.time)
        if np.abs(g).max() > _GRAD_EPS:
            raise SingularVarianceError(
                f"entry at t={entry.time} has |expectation|=1 with nonzero "
                "sensitivity; its information contribution is unbounded")
        warnings.warn(
            f"binomial variance floored at {VARIANCE_FLOOR} for t={entry.time}",
            RuntimeWarning, stacklevel=2)
        v = VARIANCE_FLOOR
    return v


def fisher_matrix(model: RamseyModel, free_params: Sequence[str],
                  measurement: MeasurementPlan,
                  vm: VarianceModel = VarianceModel.UnitShot) -> FisherMatrix:
    """Information matrix of a plan for the given free parameters."""
    names = tuple(free_params)
    if not names:
        raise DomainError("free_params must be nonempty")
    p = len(names)
    out = np.zeros((p, p))
    for e in measurement.entries:
        g = expectation_gradient(model, e.quadrature, e.time, names)
        v = entry_variance(model, e, vm, grad=g)
        out += (e.shots / v) * np.outer(g, g)
    return FisherMatrix(labels=names, matrix=out)


def _inverse(m: np.ndarray) -> np.ndarray:
    # closed forms for the tiny sizes that dominate usage
    p = m.shape[0]
    if p == 1:
        return np.array([[1.0 / m[0, 0]]])
    if p == 2:
        a, b, d = m[0, 0], m[0, 1], m[1, 1]
        det = a * d - b * b
        return np.array([[d, -b], [-b, a]]) / det
    if p == 3:
        det = np.linalg.det(m)
        cof = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
                cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
        return cof.T / det
    return np.linalg.solve(m, np.eye(p))


def crb(fi: FisherMatrix) -> CrbResult:
    """Per-parameter variance lower bounds: the diagonal of the inverse.

    Raises NonIdentifiableError (carrying the flattest parameter direction)
    when the matrix cannot be inverted reliably.
    """
    m = fi.matrix
    evals, evecs = np.linalg.eigh(m)
    if evals[0] <= 0 or evals[-1] / evals[0] > CONDITION_LIMIT:
        null = evecs[:, 0]
        combo = " + ".join(f"{c:+.3f}*{n}" for c, n in zip(null, fi.labels))
        raise NonIdentifiableError(
            f"information matrix is singular or ill-conditioned; "
            f"unresolvable direction: {combo}", null_direction=null)
    inv = _inverse(m)
    diag = np.diag(inv).copy()
    return CrbResult(labels=fi.labels, per_param_variance_bound=diag,
                     trace_bound=float(diag.sum()))


def xy_single_time_crb(params: QubitParams, t: float,
                       shots_per_quadrature: int) -> CrbResult:
    """Closed-form bound for the plan {(t, X, N), (t, Y, N)} under UnitShot.

    Splitting shots across both quadratures at one time diagonalizes the
    information matrix and gives equal bounds e^{2 gamma t} / (N t^2) on
    omega and gamma, independent of omega.
    """
    if t <= 0:
        raise DomainError("bound diverges at t = 0")
    if shots_per_quadrature < 1:
        raise DomainError("need at least one shot per quadrature")
    b = math.exp(2.0 * params.gamma * t) / (shots_per_quadrature * t * t)
    diag = np.array([b, b])
    return CrbResult(labels=("omega", "gamma"), per_param_variance_bound=diag,
                     trace_bound=float(diag.sum()))


def plan_crb(model: RamseyModel, measurement: MeasurementPlan,
             vm: VarianceModel = VarianceModel.UnitShot,
             free_params: Sequence[str] | None = None) -> CrbResult:
    """fisher_matrix + crb in one call with the model's canonical parameters."""
    names = tuple(free_params) if free_params is not None else free_parameters(model)
    return crb(fisher_matrix(model, names, measurement, vm))
