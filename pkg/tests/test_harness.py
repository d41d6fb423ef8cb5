import json
import math

import numpy as np
import pytest

from zogradient.bounds import lower_bound_minimax
from zogradient.harness import (
    ExperimentGrid,
    ExperimentRecord,
    RecoveryGameResult,
    emit_results,
    fdm_trial_errors,
    fit_rate,
    gap_report,
    gap_slope,
    read_results,
    run_fdm_grid,
    run_recovery_game,
)
from zogradient.packing import build_packing


def test_grid_validation():
    with pytest.raises(ValueError):
        ExperimentGrid([4], [7])
    with pytest.raises(ValueError):
        ExperimentGrid([4], [100], trials=99)
    with pytest.raises(ValueError):
        ExperimentGrid([4], [100], policy="newton")
    with pytest.raises(ValueError):
        ExperimentGrid([], [100])


def test_calibration_k0():
    rec = run_fdm_grid(ExperimentGrid([4], [160], trials=5000, master_seed=3))[0]
    assert rec.predicted == pytest.approx(0.504626504404032, rel=1e-12)
    assert abs(rec.mean_l1_error - rec.predicted) <= 2 * rec.ci_halfwidth


def test_noiseless_bias_is_deterministic():
    grid = ExperimentGrid([3], [60], sigma=0.0, k=6.0, trials=100, policy="fixed:0.5", lin=1.0)
    rec = run_fdm_grid(grid)[0]
    # d h^2 k / 6
    assert rec.mean_l1_error == pytest.approx(0.75, rel=1e-12)
    assert rec.ci_halfwidth == 0.0
    assert rec.predicted == pytest.approx(0.75, rel=1e-12)


def test_leftover_budget_uses_effective_t():
    # T = 167 at d = 4 spends only 160 queries
    a = run_fdm_grid(ExperimentGrid([4], [167], trials=100))[0]
    assert a.predicted == pytest.approx(0.504626504404032, rel=1e-12)


def test_determinism_and_worker_independence():
    grid = ExperimentGrid([4], [40], trials=4100, master_seed=11)
    one = fdm_trial_errors(grid, 4, 40, n_jobs=1)
    two = fdm_trial_errors(grid, 4, 40, n_jobs=2)
    np.testing.assert_array_equal(one, two)
    other = fdm_trial_errors(ExperimentGrid([4], [40], trials=4100, master_seed=12), 4, 40)
    assert not np.array_equal(one, other)


def test_trials_are_prefix_stable():
    short = fdm_trial_errors(ExperimentGrid([2], [20], trials=300, master_seed=5), 2, 20)
    long = fdm_trial_errors(ExperimentGrid([2], [20], trials=2500, master_seed=5), 2, 20)
    np.testing.assert_array_equal(short, long[:300])


def test_ci_shrinks_with_trials():
    small = run_fdm_grid(ExperimentGrid([4], [160], trials=400, master_seed=1))[0]
    big = run_fdm_grid(ExperimentGrid([4], [160], trials=1600, master_seed=1))[0]
    assert small.ci_halfwidth / big.ci_halfwidth == pytest.approx(2.0, rel=0.2)


def _synthetic(xs, axis, slope, scale=3.0):
    out = []
    for x in xs:
        d, T = (4, x) if axis == "T" else (x, 4096)
        out.append(ExperimentRecord(d, T, 1.0, 0.0, 100, scale * x**slope, 0.0, 0.0, 0))
    return out


def test_fit_rate_recovers_power_law():
    fit = fit_rate(_synthetic([64, 128, 512, 2048], "T", -0.5), "T")
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit_rate(_synthetic([2, 4, 8], "d", 1.5), "d").slope == pytest.approx(1.5, abs=1e-12)


def test_fit_rate_errors():
    with pytest.raises(ValueError):
        fit_rate(_synthetic([64, 128], "T", -0.5), "T")
    with pytest.raises(ValueError):
        fit_rate(_synthetic([64, 128, 256], "T", -0.5), "x")
    mixed = _synthetic([64, 128], "T", -0.5) + _synthetic([2], "d", 1.0)
    with pytest.raises(ValueError):
        fit_rate(mixed, "T")


def test_emit_read_round_trip_csv(tmp_path):
    recs = run_fdm_grid(ExperimentGrid([2, 4], [40, 80], trials=100, master_seed=2))
    path = tmp_path / "out.csv"
    written = emit_results(recs, path, meta={"seed": 2, "dims": "2,4"})
    assert read_results(path) == recs
    text = path.read_text().splitlines()
    assert text[:2] == ["# seed=2", "# dims=2,4"]
    assert text[2].split(",") == list(ExperimentRecord.__dataclass_fields__)
    plot = (tmp_path / "out.plot.csv").read_text().splitlines()
    assert written[1].endswith("out.plot.csv")
    assert plot[0] == "sweep,x,empirical,predicted" and len(plot) == 5
    assert plot[1].startswith("d=2,40,")


def test_emit_read_round_trip_json(tmp_path):
    recs = run_fdm_grid(ExperimentGrid([2], [20, 40], trials=100))
    path = tmp_path / "out.json"
    emit_results(recs, path, format="json", meta={"seed": 0})
    doc = json.loads(path.read_text())
    assert doc["config"] == {"seed": 0} and len(doc["records"]) == 2
    assert read_results(path) == recs


def test_emit_empty_and_bad_format(tmp_path):
    path = tmp_path / "empty.csv"
    assert emit_results([], path) == [str(path)]
    assert path.read_text().splitlines() == [",".join(ExperimentRecord.__dataclass_fields__)]
    assert read_results(path) == []
    with pytest.raises(ValueError):
        emit_results([], tmp_path / "x.xml", format="xml")


def test_recovery_result_round_trip(tmp_path):
    res = run_recovery_game(8, 32, 0.05, 200, master_seed=4)
    path = tmp_path / "game.csv"
    emit_results([res], path)
    assert read_results(path, RecoveryGameResult) == [res]
    assert not (tmp_path / "game.plot.csv").exists()


def test_recovery_game_vanishing_signal():
    # with delta -> 0 the decoder almost never hits and falls back to a uniform guess
    res = run_recovery_game(16, 32, 1e-6, 4000, master_seed=0)
    baseline = 1 - 1 / res.packing_size
    assert abs(res.empirical_error_prob - baseline) <= 4 * math.sqrt(baseline * (1 - baseline) / 4000)
    assert not res.markov_ceiling_applicable


def test_recovery_game_markov_ceiling():
    res = run_recovery_game(4, 40000, 0.25, 200, master_seed=1)
    assert res.markov_ceiling_applicable
    assert res.mean_l1_risk <= res.psi / 9
    assert res.empirical_error_prob <= 3 * res.mean_l1_risk / res.psi


def test_recovery_game_respects_fano_floor():
    res = run_recovery_game(16, 32, 0.01, 2000, master_seed=2)
    assert res.empirical_error_prob >= res.fano_floor - 3 * res.binomial_se


def test_recovery_game_deterministic():
    p = build_packing(8, 9)
    a = run_recovery_game(8, 64, 0.1, 2100, master_seed=9, packing=p)
    b = run_recovery_game(8, 64, 0.1, 2100, master_seed=9, n_jobs=2)
    assert a == b


def test_recovery_game_validation():
    with pytest.raises(ValueError):
        run_recovery_game(3, 40, 0.1, 10, 0)
    with pytest.raises(ValueError):
        run_recovery_game(8, 10, 0.1, 10, 0)


def test_gap_report():
    cells = gap_report([8, 16, 32], [100, 1000])
    vac = [c for c in cells if c.vacuous]
    assert {c.d for c in vac} == {8} and all(c.ratio == math.inf for c in vac)
    c = next(c for c in cells if c.d == 16 and c.T == 100)
    assert c.lower_bound == lower_bound_minimax(16, 100)
    assert c.ratio == pytest.approx(c.fdm_exact / c.lower_bound)
    slopes = gap_slope(cells, "T")
    assert set(slopes) == {16, 32}
    # both rates scale as T^-1/2
    assert all(s == pytest.approx(0.0, abs=1e-12) for s in slopes.values())
    assert set(gap_slope(cells, "d")) == {100, 1000}
