"""Crosstalk calibration on a qubit chain.

Always-on ZZ-type couplings shift a qubit's Ramsey frequency by J for each
neighbor prepared in |1>. Four experiments reduce the whole chain to
independent single-qubit problems: two cover every omega with all spectators
in |0>, two cover every coupling by placing exactly one |1> next to each
probed qubit. A global-superposition curve for the 3-qubit chain is included
as a negative control for joint fitting.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import (DomainError, EstimationError, ProtocolViolationError)
from .estimator import fit_least_squares, fit_points, invert_xy
from .planner import SingleTimeXY, StrategyKind, build_strategy
from .sampler import SampleSet, sample, sample_values
from .signal import Quadrature, QubitParams, RamseyModel, TwoParam, expectation


class QubitRole(enum.Enum):
    Ramsey = "R"
    Zero = "0"
    One = "1"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ChainParams:
    omegas: tuple
    gammas: tuple
    couplings: tuple     # couplings[i] joins qubits i and i+1

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "couplings",
                           tuple(float(j) for j in self.couplings))
        n = len(self.omegas)
        if n < 2:
            raise DomainError("chain needs at least 2 qubits")
        if len(self.gammas) != n or len(self.couplings) != n - 1:
            raise DomainError(
                f"inconsistent lengths: {n} omegas, {len(self.gammas)} gammas, "
                f"{len(self.couplings)} couplings")
        values = self.omegas + self.gammas + self.couplings
        if not all(math.isfinite(v) for v in values):
            raise DomainError("chain parameters must be finite")
        if any(g < 0 for g in self.gammas):
            raise DomainError("gammas must be nonnegative")

    @property
    def n_qubits(self) -> int:
        return len(self.omegas)

    def to_json(self) -> dict:
        return {"omegas": list(self.omegas), "gammas": list(self.gammas),
                "couplings": list(self.couplings)}

    @classmethod
    def from_json(cls, blob: dict) -> "ChainParams":
        return cls(tuple(blob["omegas"]), tuple(blob["gammas"]),
                   tuple(blob["couplings"]))


@dataclass(frozen=True)
class Target:
    qubit: int
    kind: str                  # "omega" or "J"
    edge: tuple | None = None  # (a, a+1) when kind == "J"


@dataclass(frozen=True)
class ExperimentConfig:
    roles: tuple
    targets: tuple

    def to_json(self) -> dict:
        return {"roles": [str(r) for r in self.roles],
                "targets": [{"kind": t.kind, "qubit": t.qubit,
                             "edge": list(t.edge) if t.edge else None}
                            for t in self.targets]}


def _chain_adjacency(n: int):
    return [tuple(j for j in (i - 1, i + 1) if 0 <= j < n) for i in range(n)]


def validate_experiment(adjacency, config: ExperimentConfig) -> None:
    """Raise ProtocolViolationError when roles or targets break the rules."""
    roles = config.roles
    n = len(roles)
    if len(adjacency) != n:
        raise ProtocolViolationError(
            f"{n} roles for {len(adjacency)} qubits")
    one_neighbors = {}
    for i, role in enumerate(roles):
        if role is not QubitRole.Ramsey:
            continue
        if any(roles[j] is QubitRole.Ramsey for j in adjacency[i]):
            raise ProtocolViolationError(f"adjacent Ramsey qubits at {i}")
        ones = [j for j in adjacency[i] if roles[j] is QubitRole.One]
        if len(ones) > 1:
            raise ProtocolViolationError(
                f"qubit {i} has {len(ones)} neighbors in |1>; at most one allowed")
        one_neighbors[i] = ones
    for t in config.targets:
        if roles[t.qubit] is not QubitRole.Ramsey:
            raise ProtocolViolationError(
                f"target on non-Ramsey qubit {t.qubit}")
        ones = one_neighbors[t.qubit]
        if t.kind == "J":
            if len(ones) != 1:
                raise ProtocolViolationError(
                    f"J target on qubit {t.qubit} without a unique |1> neighbor")
            if t.edge != (min(t.qubit, ones[0]), max(t.qubit, ones[0])):
                raise ProtocolViolationError(
                    f"J target edge {t.edge} does not match roles")
        elif t.kind == "omega":
            if ones:
                raise ProtocolViolationError(
                    f"omega target on qubit {t.qubit} is shifted by a |1> neighbor")
        else:
            raise ProtocolViolationError(f"unknown target kind {t.kind!r}")


def effective_frequency(chain: ChainParams, roles, i: int) -> float:
    """Precession rate of Ramsey qubit i: omega_i plus J for each |1> neighbor."""
    roles = tuple(roles)
    adjacency = _chain_adjacency(chain.n_qubits)
    validate_experiment(adjacency, ExperimentConfig(roles, ()))
    if roles[i] is not QubitRole.Ramsey:
        raise ProtocolViolationError(f"qubit {i} is not in the Ramsey role")
    shift = 0.0
    for j in adjacency[i]:
        if roles[j] is QubitRole.One:
            shift += chain.couplings[min(i, j)]
    return chain.omegas[i] + shift


def build_chain_protocol(n_qubits: int):
    """The four-experiment schedule covering every omega and coupling once.

    Experiments 0-1 probe even then odd qubits with all spectators in |0>.
    Experiments 2-3 probe even qubits again while odd spectators alternate
    |1>, |0>, ... (experiment 2) and |0>, |1>, ... (experiment 3); each
    Ramsey qubit then sees at most one |1> neighbor, and every edge lands on
    exactly one (qubit, experiment) pair.
    """
    if n_qubits < 2:
        raise DomainError("protocol needs at least 2 qubits")
    n = n_qubits
    adjacency = _chain_adjacency(n)
    evens = range(0, n, 2)
    odds = range(1, n, 2)

    def omega_experiment(actives):
        roles = [QubitRole.Zero] * n
        for i in actives:
            roles[i] = QubitRole.Ramsey
        targets = tuple(Target(i, "omega") for i in actives)
        return ExperimentConfig(tuple(roles), targets)

    def coupling_experiment(first_spectator_one: bool):
        roles = [QubitRole.Zero] * n
        for i in evens:
            roles[i] = QubitRole.Ramsey
        state = first_spectator_one
        for i in odds:
            roles[i] = QubitRole.One if state else QubitRole.Zero
            state = not state
        targets = []
        for i in evens:
            ones = [j for j in adjacency[i] if roles[j] is QubitRole.One]
            if len(ones) == 1:
                u = ones[0]
                targets.append(Target(i, "J", (min(i, u), max(i, u))))
        return ExperimentConfig(tuple(roles), tuple(targets))

    experiments = [omega_experiment(evens), omega_experiment(odds),
                   coupling_experiment(True), coupling_experiment(False)]
    for cfg in experiments:
        validate_experiment(adjacency, cfg)
    return experiments


def sample_multi(experiment: ExperimentConfig, chain: ChainParams,
                 measurement, seed: int, experiment_id: int = 0) -> dict:
    """Sample every Ramsey-role qubit independently at its effective
    frequency; spectators produce nothing. Streams are keyed by
    (seed, experiment_id, qubit, entry), so disjoint qubits share no
    randomness and single-qubit results are reproduced bit for bit."""
    adjacency = _chain_adjacency(chain.n_qubits)
    validate_experiment(adjacency, experiment)
    out = {}
    for i, role in enumerate(experiment.roles):
        if role is not QubitRole.Ramsey:
            continue
        model = TwoParam(QubitParams(
            effective_frequency(chain, experiment.roles, i), chain.gammas[i]))
        out[i] = sample(model, measurement, seed, experiment=experiment_id,
                        qubit=i)
    return out


# ---------------------------------------------------------------------------
# the full protocol

@dataclass(frozen=True)
class ProtocolResult:
    omega_hat: tuple
    gamma_hat: tuple
    j_hat: tuple

    def to_json(self) -> dict:
        return {"omega_hat": list(self.omega_hat),
                "gamma_hat": list(self.gamma_hat),
                "j_hat": list(self.j_hat)}


def _estimate_frequency(strategy, measurement, data: SampleSet, guess: QubitParams,
                        qubit: int, frozen_gamma: float | None, noiseless_means=None):
    """One qubit-experiment estimate. Returns (omega_signed, gamma).

    X-only strategies report |omega|; the guess supplies the sign (the
    calibration prior decides what X data cannot).
    """
    times = [r.time for r in data.records]
    quads = [r.quadrature for r in data.records]
    means = list(noiseless_means) if noiseless_means is not None else \
        [r.empirical_mean for r in data.records]

    if isinstance(strategy, SingleTimeXY):
        t = times[0]
        by_quad = {str(q): m for q, m in zip(quads, means)}
        est = invert_xy(by_quad["X"], by_quad["Y"], t, omega_prior=guess.omega)
        return est.omega, est.gamma

    gamma0 = frozen_gamma if frozen_gamma is not None else guess.gamma
    init = TwoParam(QubitParams(abs(guess.omega), gamma0))
    frozen = ("gamma",) if frozen_gamma is not None else ()
    est = fit_points(init, times, quads, means, frozen=frozen)
    if not est.converged:
        raise EstimationError("frequency fit did not converge", qubit=qubit)
    sign = -1.0 if guess.omega < 0 else 1.0
    return sign * est.params["omega"], est.params["gamma"]


def run_protocol(chain: ChainParams, budget: int, strategy: StrategyKind,
                 seed: int, guesses: ChainParams | None = None,
                 noiseless: bool = False) -> ProtocolResult:
    """Estimate every omega, gamma, and J of the chain.

    budget is the shot count per probed qubit per experiment. guesses feed
    planning and fit initialization (defaults to the true values). With
    noiseless=True exact expectations replace sampled means, which recovers
    the parameters to numerical precision.
    """
    guesses = guesses if guesses is not None else chain
    if guesses.n_qubits != chain.n_qubits:
        raise DomainError("guess chain size differs from true chain")
    n = chain.n_qubits
    experiments = build_chain_protocol(n)
    omega_hat = [math.nan] * n
    gamma_hat = [math.nan] * n
    j_hat = [math.nan] * (n - 1)

    def run_target(exp_id, cfg, target, guess, frozen_gamma):
        measurement = build_strategy(strategy, guess, budget)
        model = TwoParam(QubitParams(
            effective_frequency(chain, cfg.roles, target.qubit),
            chain.gammas[target.qubit]))
        data = sample(model, measurement, seed, experiment=exp_id,
                      qubit=target.qubit)
        exact = None
        if noiseless:
            exact = [float(expectation(model, r.quadrature, r.time))
                     for r in data.records]
        return _estimate_frequency(strategy, measurement, data, guess,
                                   target.qubit, frozen_gamma, exact)

    for exp_id in (0, 1):
        cfg = experiments[exp_id]
        for target in cfg.targets:
            i = target.qubit
            guess = QubitParams(guesses.omegas[i], guesses.gammas[i])
            w, g = run_target(exp_id, cfg, target, guess, frozen_gamma=None)
            omega_hat[i], gamma_hat[i] = w, max(g, 0.0)

    for exp_id in (2, 3):
        cfg = experiments[exp_id]
        for target in cfg.targets:
            i = target.qubit
            a = target.edge[0]
            guess = QubitParams(guesses.omegas[i] + guesses.couplings[a],
                                guesses.gammas[i])
            w_eff, _ = run_target(exp_id, cfg, target, guess,
                                  frozen_gamma=gamma_hat[i])
            j_hat[a] = w_eff - omega_hat[i]

    return ProtocolResult(tuple(omega_hat), tuple(gamma_hat), tuple(j_hat))


# ---------------------------------------------------------------------------
# negative control: one global superposition on a 3-qubit chain

def global_x_curve(chain: ChainParams, t):
    """Middle-qubit X expectation when all three qubits precess together:
    the four spectator configurations contribute one cosine each."""
    if chain.n_qubits != 3:
        raise DomainError("global curve is defined for 3-qubit chains")
    t = np.asarray(t, dtype=float)
    w = chain.omegas[1]
    g = chain.gammas[1]
    j1, j2 = chain.couplings
    total = (np.cos(t * w) + np.cos(t * (j1 + w)) + np.cos(t * (j2 + w))
             + np.cos(t * (j1 + j2 + w)))
    return 0.25 * total * np.exp(-t * g)


def sample_global_x(chain: ChainParams, times, shots: int, seed: int) -> np.ndarray:
    """Binomial means of the global curve at the given times."""
    return sample_values(global_x_curve(chain, times), shots, seed,
                         experiment=4, qubit=1)


def fit_global_x(times, means, init: ChainParams) -> dict:
    """Naive joint fit of (omega_2, gamma_2, J_1, J_2) to the global curve."""
    times = np.asarray(times, dtype=float)
    means = np.asarray(means, dtype=float)

    def residual(theta):
        w, g, j1, j2 = theta
        trial = ChainParams((init.omegas[0], w, init.omegas[2]),
                            (init.gammas[0], max(g, 0.0), init.gammas[2]),
                            (j1, j2))
        return global_x_curve(trial, times) - means

    x0 = np.array([init.omegas[1], init.gammas[1], *init.couplings])
    res = least_squares(residual, x0, method="lm", max_nfev=5000)
    w, g, j1, j2 = res.x
    return {"omega": float(w), "gamma": float(max(g, 0.0)),
            "j1": float(j1), "j2": float(j2), "converged": bool(res.success)}
