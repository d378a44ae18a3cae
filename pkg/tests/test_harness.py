import csv
import json
import math

import numpy as np
import pytest

from majoritylab import harness
from majoritylab.errors import InvalidParameterError


def _cfg(**kw):
    base = dict(name="t", family="line", n=30, delta=0.3, trials=50, seed=1)
    base.update(kw)
    return harness.ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        _cfg(trials=0)
    with pytest.raises(InvalidParameterError):
        _cfg(delta=0.5)
    with pytest.raises(InvalidParameterError):
        _cfg(family="hypercube")
    with pytest.raises(InvalidParameterError):
        _cfg(family="mary", depth=None)


def test_config_from_json_and_toml(tmp_path):
    payload = dict(name="x", family="pa", n=100, delta=0.25, trials=10, seed=3)
    jpath = tmp_path / "c.json"
    jpath.write_text(json.dumps(payload))
    cfg = harness.ExperimentConfig.from_file(jpath)
    assert cfg.family == "pa" and cfg.delta == 0.25

    tpath = tmp_path / "c.toml"
    tpath.write_text(
        'name = "x"\nfamily = "pa"\nn = 100\ndelta = 0.25\ntrials = 10\nseed = 3\n'
    )
    cfg2 = harness.ExperimentConfig.from_file(tpath)
    assert cfg2 == cfg


def test_aggregates_recomputable_from_records():
    res = harness.run_experiment(_cfg(), write=False)
    again = harness.aggregate_records(res.records, res.config)
    assert again == {
        k: v for k, v in res.aggregate.items() if not k.startswith("threshold_")
    }


def test_outputs_written_atomically(tmp_path):
    cfg = _cfg(output_dir=str(tmp_path))
    res = harness.run_experiment(cfg)
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == cfg.trials
    assert [int(r["trial"]) for r in rows] == list(range(cfg.trials))
    with open(tmp_path / "t.json") as fh:
        agg = json.load(fh)
    assert agg["aggregate"]["mean_correct_fraction"] == res.aggregate["mean_correct_fraction"]
    assert agg["config"]["seed"] == cfg.seed
    assert not list(tmp_path.glob("*.tmp"))


def test_truncation_rate_fails_experiment():
    cfg = _cfg(family="line", n=200, max_steps=20, trials=20)
    res = harness.run_experiment(cfg, write=False)
    assert res.aggregate["truncation_rate"] == 1.0
    assert not res.passed


def test_thresholds_judged():
    cfg = _cfg(thresholds={"mean_correct_fraction": (">=", 0.99)})
    res = harness.run_experiment(cfg, write=False)
    assert not res.passed
    cfg2 = _cfg(thresholds={"mean_correct_fraction": (">=", 0.5)})
    assert harness.run_experiment(cfg2, write=False).passed


def test_worker_invariance():
    base = dict(name="w", family="rrt", n=100, delta=0.3, trials=20, seed=9)
    r1 = harness.run_experiment(harness.ExperimentConfig(**base, workers=1), write=False)
    r2 = harness.run_experiment(harness.ExperimentConfig(**base, workers=3), write=False)
    assert r1.records == r2.records
    assert r1.aggregate == r2.aggregate


def test_measurement_step():
    assert harness.measurement_step(16) == int(16 * math.log(16) / (32 * math.log(math.log(16))))
    with pytest.raises(InvalidParameterError):
        harness.measurement_step(15)


def test_majority_at_T_t0_vacuous():
    # at T=0 the correct-count threshold is negative, so the indicator is always on
    assert harness.correct_count_threshold(100, 0.3, 0) < 0
    cfg = _cfg(family="line", n=100, trials=10, measure_at=0)
    res = harness.majority_at_T(cfg)
    assert res.aggregate["mean_indicator"] == 1.0


def test_stabilization_stats_single_node():
    cfg = _cfg(family="line", n=1, trials=10)
    res = harness.stabilization_stats(cfg)
    assert all(r["stabilization_step"] == 1 for r in res.records)
    assert res.aggregate["violation_rate"] == 0.0


def test_sample_critical_times_distance_zero_mean():
    data = harness.sample_critical_times(20, 0, 5000, seed=2)
    assert data.min() >= 1
    assert np.mean(data) == pytest.approx(20, rel=0.05)


def test_chi_square_gof_requires_samples():
    with pytest.raises(InvalidParameterError):
        harness.chi_square_gof(np.ones(10, dtype=int), lambda t: 0.5, 1)


def test_gof_accepts_true_null_rejects_false():
    rep = harness.critical_time_gof(20, 0, 10_000, seed=21)
    assert rep.p_value > 0.001
    bad = harness.critical_time_gof(50, 4, 10_000, seed=22, null_successes=4)
    assert bad.p_value < 0.001


def test_safe_probability_sweep_rates_drop_with_degree():
    rows, fitted_c = harness.safe_probability_sweep(
        degrees=(4, 16), delta=0.3, trials=400, seed=5
    )
    by_deg = {r.degree: r.unsafe_rate for r in rows}
    assert 0.0 <= by_deg[16] <= by_deg[4] < 0.5
    for r in rows:
        assert r.unsafe_rate <= fitted_c / r.degree + 1e-12


def test_mc_correct_majority_single_node():
    from majoritylab import graphs

    g = graphs.gen_baseline("line", 1)
    p, se = harness.mc_correct_majority(g, 0.3, 5000, seed=7)
    assert p == pytest.approx(0.8, abs=4 * se)
