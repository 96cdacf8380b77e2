import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ramseyopt.errors import (DomainError, IndeterminateError,
                              UnderDeterminedError)
from ramseyopt.estimator import (EstimateResult, fit_least_squares,
                                 fit_points, invert_xy)
from ramseyopt.fisher import plan
from ramseyopt.sampler import SampleRecord, SampleSet, sample
from ramseyopt.signal import (FiveParam, Quadrature, QubitParams, TwoParam,
                              expectation)

TRUE = TwoParam(QubitParams(1.0, 1.0))
TIMES = np.linspace(0.1, 3.0, 20)


def exact_points(model, times, quad=Quadrature.X):
    quads = [quad] * len(times)
    means = [float(expectation(model, q, t)) for t, q in zip(times, quads)]
    return list(times), quads, means


def quantized_sample_set(model, times, shots=10**9):
    records = []
    for t in times:
        f = float(expectation(model, Quadrature.X, t))
        n_plus = round((1 + f) / 2 * shots)
        records.append(SampleRecord(t, Quadrature.X, shots,
                                    (2 * n_plus - shots) / shots))
    return SampleSet(tuple(records), 0, repr(model))


def test_noiseless_recovery():
    t, q, m = exact_points(TRUE, TIMES)
    est = fit_points(TwoParam(QubitParams(1.2, 0.8)), t, q, m)
    assert est.converged
    assert est.params["omega"] == pytest.approx(1.0, abs=1e-8)
    assert est.params["gamma"] == pytest.approx(1.0, abs=1e-8)
    assert est.objective < 1e-18


def test_noiseless_recovery_via_sample_set():
    est = fit_least_squares(TwoParam(QubitParams(1.2, 0.8)),
                            quantized_sample_set(TRUE, TIMES))
    assert est.params["omega"] == pytest.approx(1.0, abs=1e-6)
    assert est.params["gamma"] == pytest.approx(1.0, abs=1e-6)


def test_recovery_from_scattered_inits():
    t, q, m = exact_points(TRUE, TIMES)
    rng = np.random.default_rng(4)
    for _ in range(5):
        w0, g0 = rng.uniform(0.5, 1.5, 2)
        est = fit_points(TwoParam(QubitParams(w0, g0)), t, q, m)
        assert est.params["omega"] == pytest.approx(1.0, abs=1e-6)
        assert est.params["gamma"] == pytest.approx(1.0, abs=1e-6)


def test_x_only_reports_omega_magnitude():
    t, q, m = exact_points(TRUE, TIMES)
    est = fit_points(TwoParam(QubitParams(-1.0, 0.8)), t, q, m)
    assert est.params["omega"] == pytest.approx(1.0, abs=1e-6)
    assert est.objective < 1e-16


def test_frozen_parameters_held():
    truth = FiveParam(A=0.95, B=0.03, phi=0.1, params=QubitParams(1.0, 1.0))
    t, q, m = exact_points(truth, TIMES)
    init = FiveParam(A=0.95, B=0.03, phi=0.1, params=QubitParams(1.3, 0.7))
    est = fit_points(init, t, q, m, frozen=("A", "B", "phi"))
    assert est.frozen == ("A", "B", "phi")
    assert est.params["A"] == 0.95
    assert est.params["omega"] == pytest.approx(1.0, abs=1e-6)
    assert est.params["gamma"] == pytest.approx(1.0, abs=1e-6)


def test_fit_rejections():
    t, q, m = exact_points(TRUE, TIMES[:1])
    with pytest.raises(UnderDeterminedError):
        fit_points(TRUE, t, q, m)
    t, q, m = exact_points(TRUE, TIMES)
    with pytest.raises(DomainError):
        fit_points(TRUE, t, q, m, frozen=("omega", "gamma"))
    with pytest.raises(DomainError):
        fit_points(TRUE, t, q, m, frozen=("A",))
    with pytest.raises(DomainError):
        fit_points(TwoParam(QubitParams(math.nan, 1.0)), t, q, m)


def test_iteration_cap_reports_nonconvergence():
    data = sample(TRUE, plan([(t, "X", 200) for t in TIMES]), seed=1)
    est = fit_least_squares(TwoParam(QubitParams(1.9, 0.2)), data,
                            max_iterations=1)
    assert not est.converged
    assert all(math.isfinite(v) for v in est.params.values())


def test_gamma_clamped_nonnegative():
    est = fit_points(TwoParam(QubitParams(0.0, 0.1)),
                     [0.3, 0.6], [Quadrature.X] * 2, [0.9, 0.95])
    assert est.params["gamma"] >= 0.0


def test_exactly_determined_two_point_fit():
    t, q, m = exact_points(TRUE, np.array([0.443941, 1.784695]))
    est = fit_points(TwoParam(QubitParams(1.1, 0.9)), t, q, m)
    assert est.converged
    assert est.params["omega"] == pytest.approx(1.0, abs=1e-8)
    assert est.params["gamma"] == pytest.approx(1.0, abs=1e-8)


def test_estimate_result_json():
    t, q, m = exact_points(TRUE, TIMES)
    est = fit_points(TRUE, t, q, m)
    blob = est.to_json()
    assert set(blob) == {"params", "converged", "objective", "iterations",
                         "frozen"}
    assert blob["converged"] is True


def test_invert_xy_round_trip_exact():
    out = invert_xy(math.exp(-1) * math.cos(1), math.exp(-1) * math.sin(1), 1.0)
    assert out.omega == pytest.approx(1.0, abs=1e-12)
    assert out.gamma == pytest.approx(1.0, abs=1e-12)
    assert not out.clamped


def test_invert_xy_stationary():
    out = invert_xy(1.0, 0.0, 1.0)
    assert (out.omega, out.gamma) == (0.0, 0.0)


def test_invert_xy_fixed_point():
    out = invert_xy(0.21, 0.31, 1.0)
    assert out.omega == pytest.approx(math.atan2(0.31, 0.21), abs=1e-12)
    assert out.gamma == pytest.approx(-math.log(math.hypot(0.21, 0.31)), abs=1e-12)
    assert out.omega == pytest.approx(0.975386, abs=1e-6)
    assert out.gamma == pytest.approx(0.982343, abs=1e-6)


def test_invert_xy_overshoot_clamps():
    out = invert_xy(0.8, 0.7, 1.0)
    assert out.clamped
    assert out.gamma == 0.0
    assert out.omega == pytest.approx(math.atan2(0.7, 0.8), abs=1e-12)


def test_invert_xy_errors():
    with pytest.raises(IndeterminateError):
        invert_xy(0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        invert_xy(0.1, 0.1, 0.0)
    with pytest.raises(DomainError):
        invert_xy(0.1, 0.1, -2.0)


def test_invert_xy_prior_unwraps_branch():
    omega, gamma, t = 3.0, 0.2, 1.5
    x = math.exp(-gamma * t) * math.cos(omega * t)
    y = math.exp(-gamma * t) * math.sin(omega * t)
    principal = invert_xy(x, y, t)
    assert principal.omega != pytest.approx(omega, abs=0.1)
    unwrapped = invert_xy(x, y, t, omega_prior=2.8)
    assert unwrapped.omega == pytest.approx(omega, abs=1e-10)
    assert unwrapped.gamma == pytest.approx(gamma, abs=1e-10)


@given(st.floats(-3.0, 3.0), st.floats(0.2, 3.0),
       st.floats(0.05, 0.95), st.integers(0, 10**6))
@settings(max_examples=200, deadline=None)
def test_invert_xy_round_trip_property(omega, gamma, frac, _):
    t = frac * math.pi / max(abs(omega), 1e-3)
    t = min(t, 5.0)
    x = math.exp(-gamma * t) * math.cos(omega * t)
    y = math.exp(-gamma * t) * math.sin(omega * t)
    out = invert_xy(x, y, t)
    assert out.omega == pytest.approx(omega, abs=1e-10)
    assert out.gamma == pytest.approx(gamma, abs=1e-10)


def test_xy_monte_carlo_tracks_bound():
    # single-time dual-quadrature estimates at t=1/gamma, half budget each
    n_tot = 10**5
    xy = plan([(1.0, "X", n_tot // 2), (1.0, "Y", n_tot // 2)])
    errs_w, errs_g = [], []
    for seed in range(500):
        ss = sample(TRUE, xy, seed=seed)
        est = invert_xy(ss.records[0].empirical_mean,
                        ss.records[1].empirical_mean, 1.0)
        errs_w.append(est.omega - 1.0)
        errs_g.append(est.gamma - 1.0)
    bound = math.sqrt(math.e**2 / (n_tot / 2))
    assert np.sqrt(np.mean(np.square(errs_w))) == pytest.approx(bound, rel=0.15)
    assert np.sqrt(np.mean(np.square(errs_g))) == pytest.approx(bound, rel=0.15)


def test_estimates_unbiased_at_leading_order():
    n_tot = 10**4
    xy = plan([(1.0, "X", n_tot // 2), (1.0, "Y", n_tot // 2)])
    vals = []
    for seed in range(1000):
        ss = sample(TRUE, xy, seed=seed)
        vals.append(invert_xy(ss.records[0].empirical_mean,
                              ss.records[1].empirical_mean, 1.0).omega)
    vals = np.array(vals)
    rmse = np.sqrt(np.mean((vals - 1.0) ** 2))
    assert abs(vals.mean() - 1.0) < 3 * rmse / math.sqrt(1000)
