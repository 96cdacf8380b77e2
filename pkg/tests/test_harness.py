import json
import math

import numpy as np
import pytest

from ramseyopt.errors import DomainError, ParseError
from ramseyopt.harness import (ChainDistributions, Exact, Fixed, Perturbed,
                               SweepResult, SweepRow, SweepSpec,
                               crosstalk_scaling, draw_chain,
                               guess_policy_from_json, read_sweep_csv,
                               rmse_vs_budget, robustness_scan,
                               shot_ratio_curve, spec_hash, write_sweep_csv,
                               write_sweep_sidecar)
from ramseyopt.planner import (EquallySpacedX, SingleTimeXY, TwoTimeOptimalX)
from ramseyopt.signal import QubitParams

XY = SingleTimeXY()
TT = TwoTimeOptimalX()
ES = EquallySpacedX(20)


def small_spec(**kw):
    defaults = dict(strategies=(XY,), budgets=(1_000, 4_000), trials=40, seed=2)
    defaults.update(kw)
    return SweepSpec(**defaults)


def test_spec_validation():
    with pytest.raises(DomainError, match="trials"):
        small_spec(trials=29)
    with pytest.raises(DomainError, match="increasing"):
        small_spec(budgets=(4_000, 1_000))
    with pytest.raises(DomainError, match="increasing"):
        small_spec(budgets=(1_000, 1_000))
    with pytest.raises(DomainError, match="positive"):
        small_spec(budgets=(0, 10))


def test_spec_json_round_trip():
    spec = SweepSpec((XY, TT, ES), (100, 200), 31, 1.3, 0.7,
                     Perturbed(0.05), seed=9)
    again = SweepSpec.from_json(json.loads(json.dumps(spec.to_json())))
    assert again == spec
    assert guess_policy_from_json({"policy": "fixed", "omega": 1, "gamma": 2}) \
        == Fixed(1.0, 2.0)
    with pytest.raises(DomainError):
        guess_policy_from_json({"policy": "oracle"})


def test_rows_cover_the_full_grid():
    res = rmse_vs_budget(small_spec(strategies=(XY, TT), trials=30))
    keys = {(r.strategy, r.grid_value, r.param) for r in res.rows}
    assert keys == {(s.label, float(b), p)
                    for s in (XY, TT) for b in (1_000, 4_000)
                    for p in ("omega", "gamma")}
    assert all(r.rmse > 0 for r in res.rows)
    assert all(r.grid_param == "n_total" for r in res.rows)


def test_sweep_is_deterministic():
    a = rmse_vs_budget(small_spec())
    b = rmse_vs_budget(small_spec())
    assert a.rows == b.rows
    assert a.spec_hash == b.spec_hash


def test_threads_do_not_change_rows():
    spec = small_spec(strategies=(XY, TT))
    assert rmse_vs_budget(spec, threads=4).rows == rmse_vs_budget(spec).rows


def test_rmse_tracks_bound_at_moderate_budget():
    res = rmse_vs_budget(small_spec(budgets=(10_000,), trials=120))
    row = res.value("SingleTimeXY", 10_000, "omega")
    assert row.failures == 0
    assert row.rmse == pytest.approx(row.crb, rel=0.2)


def test_budget_growth_shrinks_error():
    res = rmse_vs_budget(small_spec(strategies=(XY,), budgets=(1_000, 16_000),
                                    trials=80))
    hi = res.value("SingleTimeXY", 16_000, "omega").rmse
    lo = res.value("SingleTimeXY", 1_000, "omega").rmse
    assert hi < lo / 2.5          # 16x shots, expect ~4x on the std scale


def test_guess_policies_change_trials():
    exact = rmse_vs_budget(small_spec())
    pert = rmse_vs_budget(small_spec(guess=Perturbed(0.2)))
    fixed = rmse_vs_budget(small_spec(guess=Fixed(1.1, 0.9)))
    assert exact.rows != pert.rows
    assert all(r.rmse > 0 for r in pert.rows + fixed.rows)


def test_robustness_scan_fixed_plans():
    grid = (0.5, 1.0, 2.0)
    res = robustness_scan((XY, ES), grid, QubitParams(1.0, 1.0),
                          4_000, trials=60, seed=4)
    matched = res.value("EquallySpacedX(20)", 1.0, "gamma").rmse
    shifted = res.value("EquallySpacedX(20)", 2.0, "gamma").rmse
    assert shifted > matched
    # the dual-quadrature plan degrades least across the scan
    for param in ("omega", "gamma"):
        ratios = {}
        for kind in (XY, ES):
            vals = [res.value(kind.label, g, param).rmse for g in grid]
            ratios[kind.label] = max(vals) / min(vals)
        assert ratios["SingleTimeXY"] < ratios["EquallySpacedX(20)"]


def test_robustness_matched_point_agrees_with_budget_sweep():
    budget = rmse_vs_budget(small_spec(budgets=(4_000,), trials=150, seed=6))
    scan = robustness_scan((XY,), (1.0,), QubitParams(1.0, 1.0),
                           4_000, trials=150, seed=12)
    a = budget.value("SingleTimeXY", 4_000, "omega").rmse
    b = scan.value("SingleTimeXY", 1.0, "omega").rmse
    assert a == pytest.approx(b, rel=0.25)   # independent seeds, same physics


def test_robustness_validation():
    with pytest.raises(DomainError):
        robustness_scan((XY,), (1.0,), QubitParams(1.0, 1.0), 100, trials=5)
    with pytest.raises(DomainError):
        robustness_scan((XY,), (0.0, 1.0), QubitParams(1.0, 1.0), 100, trials=30)


def test_draw_chain_distributions():
    rng = np.random.default_rng(0)
    chains = [draw_chain(12, rng) for _ in range(40)]
    gammas = np.concatenate([c.gammas for c in chains])
    js = np.concatenate([c.couplings for c in chains])
    assert (gammas > 0).all()
    assert (js < 0).any()                      # raw normal draws keep sign
    assert abs(np.mean(js) - 0.5) < 0.2
    rng_a, rng_b = np.random.default_rng(3), np.random.default_rng(3)
    assert draw_chain(6, rng_a) == draw_chain(6, rng_b)


def test_draw_chain_custom_distributions():
    dists = ChainDistributions(omega_mean=2.0, omega_std=0.01,
                               coupling_mean=0.0, coupling_std=0.001)
    chain = draw_chain(8, np.random.default_rng(1), dists)
    assert abs(np.mean(chain.omegas) - 2.0) < 0.05
    assert max(abs(j) for j in chain.couplings) < 0.01


def test_crosstalk_single_edge_point():
    res = crosstalk_scaling((2,), budget=4_000, trials=30, seed=8,
                            strategies=(XY,))
    row = res.value("SingleTimeXY", 2.0, "J")
    assert row.param == "J" and row.grid_param == "n_qubits"
    assert 0 < row.rmse < 1
    assert row.crb > 0


def test_crosstalk_strategies_share_chain_draws():
    kw = dict(budget=4_000, trials=30, seed=8)
    solo = crosstalk_scaling((2,), strategies=(XY,), **kw)
    both = crosstalk_scaling((2,), strategies=(TT, XY), **kw)
    assert solo.value("SingleTimeXY", 2.0, "J") \
        == both.value("SingleTimeXY", 2.0, "J")


def test_shot_ratio_curve_values_and_monotonicity():
    res = shot_ratio_curve((0.5, 1.0, 1.5, 2.0, 3.0))
    vals = {r.grid_value: r.rmse for r in res.rows}
    assert vals[0.5] == pytest.approx(1.0, abs=0.1)
    assert vals[3.0] == pytest.approx(0.6, abs=0.1)
    ordered = [vals[g] for g in (1.0, 1.5, 2.0, 3.0)]
    assert all(b <= a + 0.02 for a, b in zip(ordered, ordered[1:]))
    assert all(r.trials == 0 for r in res.rows)


def test_shot_ratio_grid_validation():
    with pytest.raises(DomainError):
        shot_ratio_curve((0.0, 1.0))
    with pytest.raises(DomainError):
        shot_ratio_curve((4.5,))


def test_csv_round_trip(tmp_path):
    res = rmse_vs_budget(small_spec(trials=30))
    csv_path = tmp_path / "sweep.csv"
    side_path = tmp_path / "sweep.json"
    write_sweep_csv(res, csv_path)
    write_sweep_sidecar(res, side_path)
    rows, embedded_hash = read_sweep_csv(csv_path)
    assert rows == res.rows
    sidecar = json.loads(side_path.read_text())
    assert sidecar["spec_hash"] == embedded_hash == res.spec_hash
    assert SweepSpec.from_json(sidecar["spec"]) == small_spec(trials=30)


def test_csv_parse_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("strategy,grid_param\n")
    with pytest.raises(ParseError, match="line 1"):
        read_sweep_csv(p)
    p.write_text("# spec_hash = abc\nwrong,header\n")
    with pytest.raises(ParseError, match="line 2"):
        read_sweep_csv(p)
    p.write_text("# spec_hash = abc\n"
                 "strategy,grid_param,grid_value,param,rmse,crb,trials,failures\n"
                 "SingleTimeXY,n_total,oops,omega,1,1,30,0\n")
    with pytest.raises(ParseError, match="line 3"):
        read_sweep_csv(p)


def test_failure_flagging():
    rows = (SweepRow("SingleTimeXY", "n_total", 100.0, "omega",
                     0.1, 0.09, 100, 6),
            SweepRow("SingleTimeXY", "n_total", 200.0, "omega",
                     0.1, 0.09, 100, 5))
    res = SweepResult(rows, "rmse-vs-budget", {"x": 1}, 0)
    assert res.flagged == [rows[0]]


def test_spec_hash_is_canonical():
    assert spec_hash({"b": 1, "a": 2}) == spec_hash({"a": 2, "b": 1})
    assert spec_hash({"a": 1}) != spec_hash({"a": 2})
