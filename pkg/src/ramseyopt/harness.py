"""Monte Carlo benchmark sweeps: estimator RMSE against the information bound.

Four sweep families: RMSE vs total budget, robustness to a wrong decay-rate
guess under frozen plans, coupling-estimate scaling with chain length, and
the analytic two-time shot-split curve. Results land in a flat row table
(one row per strategy x grid point x parameter) that serializes to CSV with
a JSON sidecar carrying the generating spec and its hash.

Seeding is hierarchical and content-keyed: every trial's draws come from
SeedSequence((seed, strategy index, grid index, trial, purpose)), so adding
strategies, grid points, or trials never disturbs existing streams, and all
strategies see identical parameter draws at a given grid point (paired
comparisons).
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .chain import ChainParams, run_protocol
from .errors import (DomainError, EstimationError, IndeterminateError,
                     ParseError)
from .estimator import fit_least_squares, invert_xy
from .fisher import Quadrature, VarianceModel, plan_crb
from .planner import (SingleTimeXY, StrategyKind, build_strategy,
                      shot_ratio, strategy_from_label)
from .sampler import sample
from .signal import QubitParams, TwoParam

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# guess policies

@dataclass(frozen=True)
class Exact:
    def to_json(self):
        return {"policy": "exact"}


@dataclass(frozen=True)
class Perturbed:
    sigma: float
    def to_json(self):
        return {"policy": "perturbed", "sigma": self.sigma}


@dataclass(frozen=True)
class Fixed:
    omega: float
    gamma: float
    def to_json(self):
        return {"policy": "fixed", "omega": self.omega, "gamma": self.gamma}


def guess_policy_from_json(blob: dict):
    kind = blob.get("policy")
    if kind == "exact":
        return Exact()
    if kind == "perturbed":
        return Perturbed(float(blob["sigma"]))
    if kind == "fixed":
        return Fixed(float(blob["omega"]), float(blob["gamma"]))
    raise DomainError(f"unknown guess policy {blob!r}")


# ---------------------------------------------------------------------------
# specs and results

@dataclass(frozen=True)
class SweepSpec:
    strategies: tuple
    budgets: tuple
    trials: int
    true_omega: float = 1.0
    true_gamma: float = 1.0
    guess: object = Exact()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        if self.trials < 30:
            raise DomainError("trials must be >= 30 for stable RMSE estimates")
        if not self.budgets or any(b <= 0 for b in self.budgets):
            raise DomainError("budgets must be positive")
        if any(b >= a for b, a in zip(self.budgets, self.budgets[1:])):
            raise DomainError("budgets must be strictly increasing")

    def to_json(self) -> dict:
        return {
            "strategies": [s.label for s in self.strategies],
            "budgets": list(self.budgets),
            "trials": self.trials,
            "true_omega": self.true_omega,
            "true_gamma": self.true_gamma,
            "guess": self.guess.to_json(),
            "seed": self.seed,
        }

    @staticmethod
    def from_json(blob: dict) -> "SweepSpec":
        return SweepSpec(
            tuple(strategy_from_label(s) for s in blob["strategies"]),
            tuple(blob["budgets"]), int(blob["trials"]),
            float(blob.get("true_omega", 1.0)),
            float(blob.get("true_gamma", 1.0)),
            guess_policy_from_json(blob.get("guess", {"policy": "exact"})),
            int(blob.get("seed", 0)))


@dataclass(frozen=True)
class SweepRow:
    strategy: str
    grid_param: str
    grid_value: float
    param: str
    rmse: float
    crb: float
    trials: int
    failures: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    op: str
    spec: dict          # generating parameters, JSON-ready
    seed: int
    code_version: str = __version__

    @property
    def spec_hash(self) -> str:
        return spec_hash(self.spec)

    @property
    def flagged(self):
        """Grid points where more than 5% of trials failed to converge."""
        return [r for r in self.rows
                if r.trials > 0 and r.failures > 0.05 * r.trials]

    def value(self, strategy: str, grid_value: float, param: str) -> SweepRow:
        for r in self.rows:
            if (r.strategy == strategy and r.param == param
                    and math.isclose(r.grid_value, grid_value)):
                return r
        raise KeyError((strategy, grid_value, param))


def spec_hash(spec: dict) -> str:
    canon = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# single-qubit trial machinery

def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(
        (seed & _MASK64, *key)))


def _sampler_seed(seed, *key) -> int:
    hi, lo = np.random.SeedSequence((seed & _MASK64, *key)).generate_state(2)
    return (int(hi) << 32) | int(lo)


def _draw_guess(policy, truth: QubitParams, rng) -> QubitParams:
    if isinstance(policy, Exact):
        return truth
    if isinstance(policy, Fixed):
        return QubitParams(policy.omega, policy.gamma)
    if isinstance(policy, Perturbed):
        z = rng.normal(0.0, policy.sigma, 2)
        return QubitParams(truth.omega * (1.0 + z[0]),
                           truth.gamma * (1.0 + z[1]))
    raise DomainError(f"unknown guess policy {policy!r}")


def _estimate_once(kind: StrategyKind, measurement, truth: TwoParam,
                   guess: QubitParams, seed: int):
    """One sample -> fit round; returns (omega, gamma) or None on failure."""
    data = sample(truth, measurement, seed)
    try:
        if isinstance(kind, SingleTimeXY):
            by_quad = {r.quadrature: r.empirical_mean for r in data.records}
            t = data.records[0].time
            est = invert_xy(by_quad[Quadrature.X], by_quad[Quadrature.Y], t,
                            omega_prior=guess.omega)
            return est.omega, est.gamma
        result = fit_least_squares(TwoParam(guess), data)
        if not result.converged:
            return None
        return result.value("omega"), result.value("gamma")
    except (IndeterminateError, EstimationError):
        return None


def _rmse_rows(estimates, failures, truth: TwoParam, crb_result, label,
               grid_param, grid_value, trials):
    """Two rows (omega, gamma) of relative RMSE + relative bound."""
    rows = []
    arr = np.asarray(estimates, dtype=float)
    for pi, name in enumerate(("omega", "gamma")):
        true_val = getattr(truth.params, name)
        if arr.size:
            rmse = float(np.sqrt(np.mean((arr[:, pi] - true_val) ** 2)))
        else:
            rmse = math.inf
        bound = math.sqrt(crb_result.bound(name))
        scale = abs(true_val) if true_val != 0 else 1.0
        rows.append(SweepRow(label, grid_param, float(grid_value), name,
                             rmse / scale, bound / scale, trials, failures))
    return rows


def _map_points(points, worker, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, points))
    else:
        results = [worker(p) for p in points]
    rows = []
    for chunk in results:    # deterministic: spec order, not completion order
        rows.extend(chunk)
    return rows


# ---------------------------------------------------------------------------
# sweeps

def rmse_vs_budget(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Relative RMSE per parameter against the bound, on a budget grid.

    Per (strategy, N_tot): build the plan from the guess, then repeat
    sample -> fit. Non-converged fits are excluded from the RMSE and counted
    in the failures column. The bound column is the square-root CRB of the
    exact-guess plan evaluated at the true parameters under binomial noise.
    """
    truth = TwoParam(QubitParams(spec.true_omega, spec.true_gamma))
    points = [(si, kind, gi, n) for si, kind in enumerate(spec.strategies)
              for gi, n in enumerate(spec.budgets)]

    def run_point(point):
        si, kind, gi, n_total = point
        reference = build_strategy(kind, truth.params, n_total)
        bound = plan_crb(truth, reference, vm=VarianceModel.Binomial)
        estimates, failures = [], 0
        for trial in range(spec.trials):
            rng = _stream(spec.seed, si, gi, trial, 1)
            guess = _draw_guess(spec.guess, truth.params, rng)
            measurement = build_strategy(kind, guess, n_total)
            est = _estimate_once(kind, measurement, truth, guess,
                                 _sampler_seed(spec.seed, si, gi, trial, 0))
            if est is None:
                failures += 1
            else:
                estimates.append(est)
        return _rmse_rows(estimates, failures, truth, bound, kind.label,
                          "n_total", n_total, spec.trials)

    rows = _map_points(points, run_point, threads)
    return SweepResult(tuple(rows), "rmse-vs-budget", spec.to_json(), spec.seed)


def robustness_scan(strategies, gamma_true_grid, guess: QubitParams,
                    n_total: int, trials: int, seed: int = 0,
                    threads: int = 1) -> SweepResult:
    """RMSE when the true decay rate walks away from the planning guess.

    Plans are built once from the guess and frozen across the grid; only the
    simulated truth moves. Fit initialization stays at the guess, mirroring
    an experiment calibrated against stale parameters.
    """
    if trials < 30:
        raise DomainError("trials must be >= 30 for stable RMSE estimates")
    strategies = tuple(strategies)
    grid = tuple(float(g) for g in gamma_true_grid)
    if any(g <= 0 for g in grid):
        raise DomainError("gamma_true grid must be positive")
    plans = {kind.label: build_strategy(kind, guess, n_total)
             for kind in strategies}
    points = [(si, kind, gi, g) for si, kind in enumerate(strategies)
              for gi, g in enumerate(grid)]

    def run_point(point):
        si, kind, gi, gamma_true = point
        truth = TwoParam(QubitParams(guess.omega, gamma_true))
        measurement = plans[kind.label]
        bound = plan_crb(truth, measurement, vm=VarianceModel.Binomial)
        estimates, failures = [], 0
        for trial in range(trials):
            est = _estimate_once(kind, measurement, truth, guess,
                                 _sampler_seed(seed, si, gi, trial, 0))
            if est is None:
                failures += 1
            else:
                estimates.append(est)
        return _rmse_rows(estimates, failures, truth, bound, kind.label,
                          "gamma_true", gamma_true, trials)

    rows = _map_points(points, run_point, threads)
    spec = {"op": "robustness", "strategies": [s.label for s in strategies],
            "gamma_true_grid": list(grid), "guess_omega": guess.omega,
            "guess_gamma": guess.gamma, "n_total": n_total, "trials": trials,
            "seed": seed}
    return SweepResult(tuple(rows), "robustness", spec, seed)


# ---------------------------------------------------------------------------
# chain sweeps

@dataclass(frozen=True)
class ChainDistributions:
    omega_mean: float = 1.0
    omega_std: float = 0.2
    gamma_mean: float = 1.0
    gamma_std: float = 0.2
    coupling_mean: float = 0.5
    coupling_std: float = 1.0

    def to_json(self):
        return {"omega": [self.omega_mean, self.omega_std],
                "gamma": [self.gamma_mean, self.gamma_std],
                "coupling": [self.coupling_mean, self.coupling_std]}


def draw_chain(n_qubits: int, rng,
               dists: ChainDistributions = ChainDistributions()) -> ChainParams:
    """Random chain; decay rates are redrawn until positive (a vanishing
    tail of the normal), couplings keep their raw draws including sign."""
    omegas = rng.normal(dists.omega_mean, dists.omega_std, n_qubits)
    gammas = rng.normal(dists.gamma_mean, dists.gamma_std, n_qubits)
    while (bad := gammas <= 1e-6).any():
        gammas[bad] = rng.normal(dists.gamma_mean, dists.gamma_std,
                                 int(bad.sum()))
    couplings = rng.normal(dists.coupling_mean, dists.coupling_std,
                           n_qubits - 1)
    return ChainParams(tuple(omegas), tuple(gammas), tuple(couplings))


def _chain_j_bound(chain: ChainParams, kind, budget: int) -> float:
    """Predicted J variance from the two frequency estimates it subtracts."""
    total = 0.0
    for a in range(chain.n_qubits - 1):
        i = a if a % 2 == 0 else a + 1     # the even endpoint runs Ramsey
        eff = chain.omegas[i] + chain.couplings[a]
        var = 0.0
        for omega in (chain.omegas[i], eff):
            truth = TwoParam(QubitParams(omega, chain.gammas[i]))
            measurement = build_strategy(
                kind, QubitParams(abs(omega), chain.gammas[i]), budget)
            var += plan_crb(truth, measurement,
                            vm=VarianceModel.Binomial).bound("omega")
        total += var
    return total / (chain.n_qubits - 1)


def crosstalk_scaling(sizes, budget: int, trials: int, seed: int = 0,
                      strategies=None,
                      dists: ChainDistributions = ChainDistributions(),
                      threads: int = 1) -> SweepResult:
    """Coupling-estimate RMSE across chain lengths at a fixed per-qubit
    budget. All strategies see identical chain draws at a given grid point.

    J errors are pooled over trials and edges; the relative normalization
    divides by the ensemble mean |J| because individual couplings can be
    drawn arbitrarily close to zero.
    """
    if trials < 30:
        raise DomainError("trials must be >= 30 for stable RMSE estimates")
    from .planner import EquallySpacedX, TwoTimeOptimalX
    if strategies is None:
        strategies = (SingleTimeXY(), TwoTimeOptimalX(), EquallySpacedX(20))
    strategies = tuple(strategies)
    sizes = tuple(int(n) for n in sizes)
    if any(n < 2 for n in sizes):
        raise DomainError("chain sizes must be >= 2")
    points = [(si, kind, gi, n) for si, kind in enumerate(strategies)
              for gi, n in enumerate(sizes)]

    def run_point(point):
        si, kind, gi, n = point
        sq_errors, abs_true, bound_vars = [], [], []
        failures = 0
        for trial in range(trials):
            chain = draw_chain(n, _stream(seed, gi, trial, 7), dists)
            try:
                outcome = run_protocol(
                    chain, budget, kind,
                    seed=_sampler_seed(seed, gi, trial, 8))
            except (EstimationError, IndeterminateError):
                failures += 1
                continue
            for a in range(n - 1):
                sq_errors.append((outcome.j_hat[a] - chain.couplings[a]) ** 2)
                abs_true.append(abs(chain.couplings[a]))
            bound_vars.append(_chain_j_bound(chain, kind, budget))
        if sq_errors:
            scale = float(np.mean(abs_true))
            rmse = float(np.sqrt(np.mean(sq_errors))) / scale
            crb_val = float(np.sqrt(np.mean(bound_vars))) / scale
        else:
            rmse = crb_val = math.inf
        return [SweepRow(kind.label, "n_qubits", float(n), "J",
                         rmse, crb_val, trials, failures)]

    rows = _map_points(points, run_point, threads)
    spec = {"op": "crosstalk-scaling",
            "strategies": [s.label for s in strategies],
            "sizes": list(sizes), "budget": budget, "trials": trials,
            "distributions": dists.to_json(), "seed": seed}
    return SweepResult(tuple(rows), "crosstalk-scaling", spec, seed)


def shot_ratio_curve(gamma_over_omega_grid) -> SweepResult:
    """Continuous first/second shot split of the two-time design vs gamma/omega.

    Analytic sweep: no sampling, so the rmse and crb columns both carry the
    ratio and the trials column is zero.
    """
    grid = tuple(float(g) for g in gamma_over_omega_grid)
    if any(not 0 < g <= 4 for g in grid):
        raise DomainError("gamma_over_omega grid must lie in (0, 4]")
    model = TwoParam(QubitParams(1.0, 1.0))
    rows = []
    for g in grid:
        ratio = shot_ratio(model, g)
        rows.append(SweepRow("TwoTimeOptimalX", "gamma_over_omega", g,
                             "shot_ratio", ratio, ratio, 0, 0))
    spec = {"op": "shot-ratio", "gamma_over_omega_grid": list(grid)}
    return SweepResult(tuple(rows), "shot-ratio", spec, 0)


# ---------------------------------------------------------------------------
# persistence

_CSV_HEADER = ["strategy", "grid_param", "grid_value", "param", "rmse",
               "crb", "trials", "failures"]


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# spec_hash = {result.spec_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for r in result.rows:
            writer.writerow([r.strategy, r.grid_param, repr(r.grid_value),
                             r.param, repr(r.rmse), repr(r.crb),
                             r.trials, r.failures])


def write_sweep_sidecar(result: SweepResult, path) -> None:
    blob = {"op": result.op, "spec": result.spec,
            "spec_hash": result.spec_hash, "seed": result.seed,
            "code_version": result.code_version,
            "flagged": [f"{r.strategy}@{r.grid_param}={r.grid_value}"
                        for r in result.flagged],
            "created_unix": time.time()}
    with open(path, "w") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sweep_csv(path):
    """Rows plus the embedded spec hash; raises ParseError with location."""
    rows = []
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# spec_hash = "):
            raise ParseError("missing spec_hash header", line=1)
        sh = first[len("# spec_hash = "):]
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise ParseError(f"unexpected header {header}", line=2)
        for lineno, rec in enumerate(reader, start=3):
            if not rec:
                continue
            try:
                rows.append(SweepRow(rec[0], rec[1], float(rec[2]), rec[3],
                                     float(rec[4]), float(rec[5]),
                                     int(rec[6]), int(rec[7])))
            except (ValueError, IndexError):
                raise ParseError("malformed sweep row", line=lineno) from None
    return tuple(rows), sh
