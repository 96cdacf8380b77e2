"""Measurement-schedule optimization: minimize the summed CRB over times
and shot allocations under a fixed total budget.

The optimizer is a multistart Nelder-Mead simplex over candidate support
sizes. Times and shot fractions are searched jointly; fractions live on the
simplex via a softmax so the search stays unconstrained. Candidate plans are
pruned, delta-merged, polished, and integer-rounded by largest remainder;
the best rounded plan wins.

All searching happens in dimensionless units tau = gamma_guess * t on a
surrogate model with gamma = 1, so rescaling (omega, gamma) -> (c omega,
c gamma) reproduces bitwise-identical schedules scaled by 1/c.

Noise-convention defaults per model family (override via PlannerConfig):
single-quadrature oscillatory plans weight entries by the actual binomial
shot variance, which is what shapes a two-time allocation; dual-quadrature
and decay-reference plans use the flat unit-variance convention under which
their classic closed-form optima hold.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, PlannerError
from .fisher import (MeasurementPlan, PlanEntry, VarianceModel, crb,
                     fisher_matrix, plan)
from .signal import (FiveParam, PureDecay, Quadrature, QubitParams,
                     RamseyModel, TwoParam, expectation, expectation_gradient,
                     free_parameters)

_WEIGHT_PRUNE = 1e-6
_EIG_COND_LIMIT = 1e12


class Objective(enum.Enum):
    TraceCrb = "trace-crb"


@dataclass(frozen=True)
class PlannerConfig:
    """Knobs for optimize_plan. None fields resolve per model family."""

    max_times: int | None = None          # candidate support cap; 10 oscillatory, 2 pure decay
    total_shots: int = 1000
    merge_tolerance: float = 0.01         # minimum gamma*t separation of returned times
    quadrature_set: tuple = (Quadrature.X,)
    objective: Objective = Objective.TraceCrb
    optimizer_restarts: int = 8
    time_bounds: tuple | None = None      # absolute (t_min, t_max); default (1e-3, 10)/gamma
    equal_shots: bool | None = None       # pin equal shots per surviving time
    variance_model: VarianceModel | None = None
    seed: int = 0

    def __post_init__(self):
        if self.total_shots < 1:
            raise DomainError("total_shots must be positive")
        if self.merge_tolerance <= 0:
            raise DomainError("merge_tolerance must be > 0")
        if self.max_times is not None and self.max_times < 2:
            raise DomainError("max_times must be >= 2")
        if self.optimizer_restarts < 1:
            raise DomainError("optimizer_restarts must be >= 1")
        quads = tuple(self.quadrature_set)
        if not quads or any(not isinstance(q, Quadrature) for q in quads):
            raise DomainError("quadrature_set must be a nonempty subset of {X, Y}")
        if len(set(quads)) != len(quads):
            raise DomainError("duplicate quadrature in quadrature_set")
        object.__setattr__(self, "quadrature_set", quads)
        if self.time_bounds is not None:
            lo, hi = self.time_bounds
            if not (0 < lo < hi):
                raise DomainError("time_bounds must satisfy 0 < t_min < t_max")


# ---------------------------------------------------------------------------
# strategies

@dataclass(frozen=True)
class EquallySpacedX:
    n_times: int = 20

    def __post_init__(self):
        if self.n_times < 2:
            raise DomainError("EquallySpacedX needs n_times >= 2")

    @property
    def label(self):
        return f"EquallySpacedX({self.n_times})"


@dataclass(frozen=True)
class TwoTimeOptimalX:
    label = "TwoTimeOptimalX"


@dataclass(frozen=True)
class SingleTimeXY:
    label = "SingleTimeXY"


@dataclass(frozen=True)
class Custom:
    plan: MeasurementPlan
    label = "Custom"


StrategyKind = Union[EquallySpacedX, TwoTimeOptimalX, SingleTimeXY, Custom]


def strategy_from_label(label: str) -> StrategyKind:
    """Parse a strategy name as used in configs and result tables."""
    s = label.strip()
    if s == "SingleTimeXY":
        return SingleTimeXY()
    if s == "TwoTimeOptimalX":
        return TwoTimeOptimalX()
    if s.startswith("EquallySpacedX(") and s.endswith(")"):
        return EquallySpacedX(int(s[len("EquallySpacedX("):-1]))
    raise DomainError(f"unknown strategy {label!r}")


# ---------------------------------------------------------------------------
# config resolution

def _dimensionless(model: RamseyModel) -> RamseyModel:
    """Surrogate with gamma = 1; evaluate at tau = gamma * t."""
    if isinstance(model, TwoParam):
        g = model.params.gamma
        return TwoParam(QubitParams(model.params.omega / g, 1.0))
    if isinstance(model, PureDecay):
        return PureDecay(A=model.A, gamma=1.0)
    raise PlannerError(
        "schedule optimization supports TwoParam and PureDecay models only; "
        "amplitude/offset/phase schedule design is out of scope")


def _gamma_guess(model: RamseyModel) -> float:
    g = model.gamma if isinstance(model, PureDecay) else model.params.gamma
    if g <= 0:
        raise PlannerError("planning requires a positive gamma guess")
    return g


def resolve_config(cfg: PlannerConfig, model: RamseyModel) -> PlannerConfig:
    """Fill the per-model-family defaults (documented in the module docstring)."""
    pure = isinstance(model, PureDecay)
    quads = (Quadrature.X,) if pure else cfg.quadrature_set
    vm = cfg.variance_model
    if vm is None:
        single = len(quads) == 1
        vm = VarianceModel.Binomial if (not pure and single) else VarianceModel.UnitShot
    equal = cfg.equal_shots if cfg.equal_shots is not None else pure
    max_times = cfg.max_times if cfg.max_times is not None else (2 if pure else 10)
    return replace(cfg, max_times=max_times, quadrature_set=quads,
                   equal_shots=equal, variance_model=vm)


# ---------------------------------------------------------------------------
# continuous design machinery (dimensionless units throughout)

@dataclass
class _Design:
    """Continuous-weight design: parallel arrays of tau, quadrature, weight."""
    taus: np.ndarray
    quads: list
    weights: np.ndarray


def _design_objective(surrogate, names, design: _Design, vm) -> float:
    p = len(names)
    info = np.zeros((p, p))
    for q in (Quadrature.X, Quadrature.Y):
        idx = [i for i, qq in enumerate(design.quads)
               if qq is q and design.weights[i] > 0]
        if not idx:
            continue
        t = design.taus[idx]
        w = design.weights[idx]
        g = expectation_gradient(surrogate, q, t, names)
        if vm is VarianceModel.Binomial:
            f = expectation(surrogate, q, t)
            v = 1.0 - f * f
            low = v < 1e-9
            if low.any():
                if np.abs(g[:, low]).max() > 1e-8:
                    return math.inf
                v = np.where(low, 1e-9, v)
        else:
            v = np.ones_like(t)
        info += (g * (w / v)) @ g.T
    # p <= 2 throughout the supported families; closed forms avoid LAPACK
    # overhead in the optimizer's hot loop
    if p == 1:
        a = info[0, 0]
        return 1.0 / a if a > 0 else math.inf
    if p == 2:
        a, b, c = info[0, 0], info[0, 1], info[1, 1]
        half_gap = math.sqrt(max((a - c) * (a - c) + 4.0 * b * b, 0.0)) / 2.0
        mid = (a + c) / 2.0
        emin, emax = mid - half_gap, mid + half_gap
        if emin <= 0 or emax / emin > _EIG_COND_LIMIT:
            return math.inf
        return (a + c) / (a * c - b * b)
    evals = np.linalg.eigvalsh(info)
    if evals[0] <= 0 or evals[-1] / evals[0] > _EIG_COND_LIMIT:
        return math.inf
    return float(np.trace(np.linalg.inv(info)))


def _unpack(x, k, quads, equal, lo, hi):
    taus = np.clip(x[:k], lo, hi)
    m = k * len(quads)
    if equal:
        weights = np.full(m, 1.0 / m)
    else:
        logits = x[k:k + m]
        ex = np.exp(logits - logits.max())
        weights = ex / ex.sum()
    taus_full = np.repeat(taus, len(quads))
    quads_full = list(quads) * k
    # np.repeat pairs each tau with every quadrature in order
    return _Design(taus_full, quads_full, weights), np.abs(x[:k] - taus).sum()


def _fast_x_objective(surrogate, names, vm, quads, equal, k, lo, hi):
    """Scalar-math twin of the generic objective for the X-only TwoParam
    case, the shape every per-qubit strategy rebuild hits inside sweeps.
    Returns None when the generic path must be used."""
    if not (isinstance(surrogate, TwoParam) and set(names) == {"omega", "gamma"}
            and quads == (Quadrature.X,)):
        return None
    w0 = surrogate.params.omega
    binom = vm is VarianceModel.Binomial
    cos, sin, exp = math.cos, math.sin, math.exp

    def objective(x):
        overshoot = 0.0
        if equal:
            weights = [1.0 / k] * k
        else:
            top = max(x[k:2 * k])
            ex = [exp(v - top) for v in x[k:2 * k]]
            tot = sum(ex)
            weights = [e / tot for e in ex]
        a = b = c2 = 0.0
        for i in range(k):
            tau = x[i]
            if tau < lo:
                overshoot += lo - tau
                tau = lo
            elif tau > hi:
                overshoot += tau - hi
                tau = hi
            if weights[i] == 0.0:
                continue
            env = exp(-tau)
            co, si = cos(w0 * tau), sin(w0 * tau)
            f = co * env
            v = 1.0 - f * f if binom else 1.0
            gw = -tau * si * env
            gg = -tau * co * env
            if binom and v < 1e-9:
                if abs(gw) > 1e-8 or abs(gg) > 1e-8:
                    return 1e300 + overshoot
                v = 1e-9
            wt = weights[i] / v
            a += wt * gw * gw
            b += wt * gw * gg
            c2 += wt * gg * gg
        half_gap = math.sqrt(max((a - c2) * (a - c2) + 4.0 * b * b, 0.0)) / 2.0
        mid = (a + c2) / 2.0
        emin = mid - half_gap
        if emin <= 0 or (mid + half_gap) / emin > _EIG_COND_LIMIT:
            return 1e300 + overshoot
        return (a + c2) / (a * c2 - b * b) * (1.0 + overshoot)

    return objective


def _run_simplex(surrogate, names, vm, quads, equal, k, lo, hi, x0,
                 maxiter_scale=400, xatol=1e-10, fatol=1e-13):
    dim = len(x0)
    objective = _fast_x_objective(surrogate, names, vm, quads, equal, k, lo, hi)

    if objective is None:
        def objective(x):
            design, overshoot = _unpack(x, k, quads, equal, lo, hi)
            val = _design_objective(surrogate, names, design, vm)
            if not math.isfinite(val):
                return 1e300 + overshoot
            return val * (1.0 + overshoot)  # gentle pull back into bounds

    res = minimize(objective, x0, method="Nelder-Mead",
                   options=dict(xatol=xatol, fatol=fatol,
                                maxiter=maxiter_scale * dim,
                                maxfev=maxiter_scale * dim))
    design, _ = _unpack(res.x, k, quads, equal, lo, hi)
    return design


def _merge_design(design: _Design, delta: float) -> _Design:
    """Iterate the merge rule to a fixpoint: same-quadrature entries closer
    than delta collapse to their plain-average time with summed weight; then
    near-coincident times across quadratures snap to a shared value."""
    entries = [(t, q, w) for t, q, w in
               zip(design.taus, design.quads, design.weights) if w > _WEIGHT_PRUNE]
    changed = True
    while changed:
        changed = False
        entries.sort(key=lambda e: (e[0], e[1].value))
        for i in range(len(entries) - 1):
            for j in range(i + 1, len(entries)):
                ti, qi, wi = entries[i]
                tj, qj, wj = entries[j]
                if tj - ti >= delta:
                    break
                if qi is qj:
                    entries[i] = ((ti + tj) / 2.0, qi, wi + wj)
                    del entries[j]
                    changed = True
                    break
            if changed:
                break
    # snap residual cross-quadrature clusters to one shared time value
    times = sorted({t for t, _, _ in entries})
    snap = {}
    cluster = [times[0]] if times else []
    for t in times[1:]:
        if t - cluster[-1] < delta:
            cluster.append(t)
        else:
            rep = sum(cluster) / len(cluster)
            snap.update({c: rep for c in cluster})
            cluster = [t]
    if cluster:
        rep = sum(cluster) / len(cluster)
        snap.update({c: rep for c in cluster})
    entries = [(snap[t], q, w) for t, q, w in entries]
    taus = np.array([e[0] for e in entries])
    quads = [e[1] for e in entries]
    weights = np.array([e[2] for e in entries])
    return _Design(taus, quads, weights / weights.sum())


def _round_weights(weights: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding preserving the exact budget."""
    raw = weights / weights.sum() * total
    counts = np.floor(raw).astype(int)
    rem = raw - counts
    short = total - counts.sum()
    for idx in np.argsort(-rem, kind="stable")[:short]:
        counts[idx] += 1
    return counts


def _design_to_plan(design: _Design, gamma: float, total: int) -> MeasurementPlan | None:
    counts = _round_weights(design.weights, total)
    entries = [(tau / gamma, q, int(n)) for tau, q, n in
               zip(design.taus, design.quads, counts) if n > 0]
    if not entries:
        return None
    entries.sort(key=lambda e: (e[0], e[1].value))
    return plan(entries)


def _plan_trace(model, names, measurement, vm) -> float:
    try:
        return crb(fisher_matrix(model, names, measurement, vm)).trace_bound
    except Exception:
        return math.inf


def _equalize_shots(design: _Design) -> _Design:
    w = np.full(len(design.taus), 1.0 / len(design.taus))
    return _Design(design.taus, design.quads, w)


def _continuous_optimum(model: RamseyModel, names, cfg: PlannerConfig):
    """Core search; returns the best merged continuous design (dimensionless)
    plus everything needed to finish the job."""
    rc = resolve_config(cfg, model)
    gamma = _gamma_guess(model)
    surrogate = _dimensionless(model)
    lo_t, hi_t = rc.time_bounds if rc.time_bounds is not None else (1e-3 / gamma, 10.0 / gamma)
    lo, hi = lo_t * gamma, hi_t * gamma
    delta = rc.merge_tolerance
    quads = rc.quadrature_set
    nq = len(quads)

    support_sizes = sorted({k for k in (2, 3, rc.max_times) if 2 <= k <= rc.max_times})
    ss = np.random.SeedSequence(rc.seed)
    children = ss.spawn(len(support_sizes) * rc.optimizer_restarts)

    def finish(design):
        design = _merge_design(design, delta)
        if rc.equal_shots:
            design = _equalize_shots(design)
        return design

    def polish(design):
        """Re-run the simplex from the merged support, then re-merge."""
        tau_u = np.array(sorted(set(design.taus.tolist())))
        kp = len(tau_u)
        if rc.equal_shots:
            xp = tau_u
        else:
            wmap = {(t, q): w for t, q, w in
                    zip(design.taus, design.quads, design.weights)}
            logits = np.array([math.log(max(wmap.get((t, q), 1e-9), 1e-9))
                               for t in tau_u for q in quads])
            xp = np.concatenate([tau_u, logits])
        out = _run_simplex(surrogate, names, rc.variance_model, quads,
                           rc.equal_shots, kp, lo, hi, xp, maxiter_scale=800)
        return finish(out)

    candidates = []
    for ki, k in enumerate(support_sizes):
        dim_w = 0 if rc.equal_shots else k * nq
        starts = []
        # structured starts: log-spaced and linearly spaced supports, flat weights
        starts.append(np.concatenate([
            np.geomspace(max(lo, 1e-3), hi * 0.5, k), np.zeros(dim_w)]))
        starts.append(np.concatenate([
            np.linspace(lo + 0.1 * (hi - lo), 0.6 * hi, k), np.zeros(dim_w)]))
        for r in range(rc.optimizer_restarts):
            rng = np.random.default_rng(children[ki * rc.optimizer_restarts + r])
            # stratified random start: one time per equal slice of the range
            edges = np.linspace(lo, min(hi, lo + 5.0), k + 1)
            taus0 = rng.uniform(edges[:-1], edges[1:])
            w0 = rng.normal(0.0, 0.5, dim_w)
            starts.append(np.concatenate([taus0, w0]))
        for x0 in starts:
            # coarse exploration; the polish pass supplies the precision
            design = finish(_run_simplex(surrogate, names, rc.variance_model,
                                         quads, rc.equal_shots, k, lo, hi, x0,
                                         maxiter_scale=150,
                                         xatol=1e-6, fatol=1e-9))
            val = _design_objective(surrogate, names, design, rc.variance_model)
            if math.isfinite(val):
                candidates.append((val, design))

    if not candidates:
        raise PlannerError("no identifiable design found for this model/quadrature set")
    candidates.sort(key=lambda c: c[0])
    polished = []
    seen_supports = set()
    for val, design in candidates:
        support = tuple(np.round(np.sort(design.taus), 6).tolist())
        if support in seen_supports:
            continue
        seen_supports.add(support)
        refined = polish(design)
        rval = _design_objective(surrogate, names, refined, rc.variance_model)
        polished.append((rval, refined) if rval <= val else (val, design))
        if len(polished) == 3:
            break
    best_val, best = min(polished, key=lambda c: c[0])
    if not math.isfinite(best_val):
        raise PlannerError("no identifiable design found for this model/quadrature set")
    return best, rc, surrogate, gamma


def optimize_plan(model: RamseyModel, cfg: PlannerConfig | None = None,
                  free_params: Sequence[str] | None = None) -> MeasurementPlan:
    """Optimal measurement plan for estimating the model's free parameters.

    The model instance doubles as the parameter guess the design is built
    around. Returns an integer-shot plan with the exact requested budget,
    times sorted ascending and delta-separated.
    """
    cfg = cfg if cfg is not None else PlannerConfig()
    names = tuple(free_params) if free_params is not None else free_parameters(model)
    valid = free_parameters(model)
    if any(n not in valid for n in names) or not names:
        raise PlannerError(
            f"cannot plan for parameters {names} of {type(model).__name__}; "
            f"identifiable parameters are {valid}")
    design, rc, surrogate, gamma = _continuous_optimum(model, names, cfg)
    result = _design_to_plan(design, gamma, rc.total_shots)
    if result is None:
        raise PlannerError("rounding eliminated every plan entry")
    if not math.isfinite(_plan_trace(model, names, result, rc.variance_model)):
        raise PlannerError("rounded plan is not identifiable")
    return result


def plan_objective(model: RamseyModel, measurement: MeasurementPlan,
                   cfg: PlannerConfig | None = None,
                   free_params: Sequence[str] | None = None) -> float:
    """Trace of the CRB of a plan under the config's resolved noise model."""
    cfg = cfg if cfg is not None else PlannerConfig()
    rc = resolve_config(cfg, model)
    names = tuple(free_params) if free_params is not None else free_parameters(model)
    return _plan_trace(model, names, measurement, rc.variance_model)


def optimal_xy_time(gamma: float) -> float:
    """Optimal single time for the dual-quadrature plan: exactly 1/gamma."""
    if gamma <= 0:
        raise DomainError("optimal_xy_time requires gamma > 0")
    return 1.0 / gamma


def shot_ratio(model: RamseyModel, gamma_over_omega: float,
               cfg: PlannerConfig | None = None) -> float:
    """Continuous (pre-rounding) shot ratio s1/s2 of the two-time X-only
    optimum, first time over second, at the requested gamma/omega."""
    if not isinstance(model, TwoParam):
        raise PlannerError("shot_ratio is defined for TwoParam models")
    if gamma_over_omega <= 0:
        raise DomainError("gamma_over_omega must be positive")
    omega = abs(model.params.omega)
    if omega <= 0:
        raise DomainError("shot_ratio needs a nonzero omega guess")
    cfg = cfg if cfg is not None else PlannerConfig()
    cfg = replace(cfg, max_times=2, quadrature_set=(Quadrature.X,), equal_shots=False)
    target = TwoParam(QubitParams(omega, gamma_over_omega * omega))
    design, _, _, _ = _continuous_optimum(target, ("omega", "gamma"), cfg)
    if len(design.taus) != 2:
        raise PlannerError(
            f"expected a two-time design, optimizer kept {len(design.taus)} times")
    order = np.argsort(design.taus)
    w1, w2 = design.weights[order]
    return float(w1 / w2)


@lru_cache(maxsize=4096)
def build_strategy(kind: StrategyKind, guess: QubitParams, total_shots: int,
                   time_span: tuple | None = None) -> MeasurementPlan:
    """Measurement plan for one of the benchmark strategies at the guess.

    SingleTimeXY splits the budget evenly over both quadratures at 1/gamma.
    TwoTimeOptimalX takes the two-time optimizer's times and pins the shots
    equal (the convention the headline comparisons use). EquallySpacedX
    spreads equal shots over n times spanning time_span, default
    (t_max/20, t_max) with t_max = 3/gamma. Plans are immutable, so results
    are memoized; repeat calls inside sweeps cost nothing.
    """
    if total_shots < 1:
        raise DomainError("total_shots must be positive")
    g = guess.gamma
    if g <= 0 and not isinstance(kind, Custom):
        raise PlannerError("strategies need a positive gamma guess")

    if isinstance(kind, SingleTimeXY):
        t = optimal_xy_time(g)
        counts = _round_weights(np.array([0.5, 0.5]), total_shots)
        return plan([(t, Quadrature.X, counts[0]), (t, Quadrature.Y, counts[1])])

    if isinstance(kind, TwoTimeOptimalX):
        if total_shots < 2:
            raise PlannerError("two-time strategy needs at least 2 shots")
        # the two-time landscape is unimodal in practice, so one restart on
        # top of the structured starts keeps sweep-scale replanning cheap
        cfg = PlannerConfig(max_times=2, total_shots=total_shots,
                            quadrature_set=(Quadrature.X,),
                            optimizer_restarts=1, seed=0)
        base = optimize_plan(TwoParam(guess), cfg)
        times = sorted({e.time for e in base.entries})
        counts = _round_weights(np.full(len(times), 1.0 / len(times)), total_shots)
        return plan([(t, Quadrature.X, int(n)) for t, n in zip(times, counts)])

    if isinstance(kind, EquallySpacedX):
        n = kind.n_times
        if n > total_shots:
            raise PlannerError(
                f"{n} times cannot share {total_shots} shots at >= 1 each")
        span = time_span if time_span is not None else (3.0 / g / 20.0, 3.0 / g)
        lo, hi = span
        if not (0 <= lo < hi):
            raise DomainError("time_span must satisfy 0 <= t_min < t_max")
        times = np.linspace(lo, hi, n)
        counts = _round_weights(np.full(n, 1.0 / n), total_shots)
        return plan([(t, Quadrature.X, int(c)) for t, c in zip(times, counts)])

    if isinstance(kind, Custom):
        base = kind.plan
        if base.total_shots == total_shots:
            return base
        weights = np.array([e.shots for e in base.entries], dtype=float)
        counts = _round_weights(weights, total_shots)
        entries = [(e.time, e.quadrature, int(c))
                   for e, c in zip(base.entries, counts) if c > 0]
        return plan(entries)

    raise DomainError(f"unknown strategy kind {kind!r}")
