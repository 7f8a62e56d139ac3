import io
import math

import numpy as np
import pytest

from aerisk import (
    ArmHazards,
    Censoring,
    Method,
    SimConfig,
    all_estimates,
    parse_dataset,
    run_bias_study,
    simulate_trial,
    split_by_arm,
    true_ae_probability,
    write_dataset,
)
from aerisk.data import max_evaluation_time
from aerisk.simulate import BIAS_COLUMNS, latent_events


def test_true_probability_values():
    assert true_ae_probability(ArmHazards(0.2, 0.1), 4.0) == pytest.approx(0.465871, abs=5e-7)
    assert true_ae_probability(ArmHazards(0.3), 2.0) == pytest.approx(1 - math.exp(-0.6))
    assert true_ae_probability(ArmHazards(0.3, 0.2), 0.0) == 0.0
    with pytest.raises(ValueError):
        true_ae_probability(ArmHazards(0.3), -1.0)


def test_true_probability_monte_carlo():
    t, is_ae = latent_events(ArmHazards(0.2, 0.1), 10**6, np.random.default_rng(4))
    hit = (t <= 4.0) & is_ae
    se = math.sqrt(hit.mean() * (1 - hit.mean()) / hit.size)
    assert abs(hit.mean() - true_ae_probability(ArmHazards(0.2, 0.1), 4.0)) < 3 * se


def test_config_validation():
    with pytest.raises(ValueError):
        ArmHazards(0.0)
    with pytest.raises(ValueError):
        ArmHazards(0.1, -0.1)
    with pytest.raises(ValueError):
        Censoring("uniform", 0)
    with pytest.raises(ValueError):
        Censoring.parse("weibull:2")
    assert Censoring.parse("uniform:10") == Censoring("uniform", 10.0)
    assert str(Censoring.parse("administrative:5")) == "administrative:5"
    with pytest.raises(ValueError):
        SimConfig(0, 1, ArmHazards(0.1), ArmHazards(0.1))


def test_single_risk_without_censoring_is_all_ae():
    trial = simulate_trial(SimConfig(50, 50, ArmHazards(0.1), ArmHazards(0.2), seed=1))
    assert np.all(trial.event_code == 1)


def test_deterministic_and_replicate_dependent():
    cfg = SimConfig(30, 20, ArmHazards(0.1, 0.05), ArmHazards(0.1, 0.05), Censoring("uniform", 10), seed=7)
    assert simulate_trial(cfg, 3) == simulate_trial(cfg, 3)
    assert simulate_trial(cfg, 3) != simulate_trial(cfg, 4)


def test_ae_type_fraction():
    cfg = SimConfig(20000, 1, ArmHazards(0.1, 0.05), ArmHazards(0.1), seed=2)
    e = split_by_arm(simulate_trial(cfg)).experimental
    assert abs(np.mean(e.event_code == 1) - 2 / 3) < 0.01


def test_administrative_censoring_caps_follow_up():
    cfg = SimConfig(500, 500, ArmHazards(0.1, 0.05), ArmHazards(0.1, 0.05), Censoring("administrative", 5), seed=3)
    trial = simulate_trial(cfg)
    assert trial.time.max() <= 5.0
    assert np.all(trial.event_code[trial.time == 5.0] == 0)


def test_generated_data_reparses():
    cfg = SimConfig(40, 40, ArmHazards(0.1, 0.05), ArmHazards(0.05, 0.05), Censoring("exponential", 0.05), seed=5)
    trial = simulate_trial(cfg)
    buf = io.StringIO()
    write_dataset(trial, buf)
    again = parse_dataset(buf.getvalue(), ce_codes=[2], ae_label=trial.ae_label)
    assert again == trial


def test_no_censoring_ip_equals_aje():
    cfg = SimConfig(100, 100, ArmHazards(0.1, 0.05), ArmHazards(0.05, 0.1), seed=8)
    for rep in range(5):
        trial = simulate_trial(cfg, rep)
        for arm in split_by_arm(trial):
            est = all_estimates(arm, max_evaluation_time(trial))
            assert est[Method.INCIDENCE_PROPORTION].value == pytest.approx(est[Method.AALEN_JOHANSEN].value, abs=1e-12)


def test_bias_report_consistent_without_censoring_or_ce():
    cfg = SimConfig(5000, 5000, ArmHazards(0.1), ArmHazards(0.05), seed=9, replications=4)
    report = run_bias_study(cfg, tau_policy=30.0)
    for entry in report.summary():
        assert entry["ratio_truth_mean"] == pytest.approx(1.0, abs=0.02), entry["estimator"]


def test_bias_direction_with_censoring_and_ce():
    cfg = SimConfig(400, 400, ArmHazards(0.1, 0.1), ArmHazards(0.1, 0.1), Censoring("uniform", 10), seed=10,
                    replications=5)
    summary = {e["estimator"]: e for e in run_bias_study(cfg).summary()}
    for arm in "EC":
        assert summary[f"{arm}:one_minus_km"]["ratio_aje_min"] > 1
        assert summary[f"{arm}:incidence_proportion"]["ratio_aje_max"] < 1


def test_null_effect_rr_centres_on_one():
    cfg = SimConfig(300, 300, ArmHazards(0.1, 0.05), ArmHazards(0.1, 0.05), Censoring("uniform", 15), seed=12,
                    replications=40)
    rr = run_bias_study(cfg).column("RR:aalen_johansen", "estimate")
    assert abs(np.median(rr) - 1) < 0.05


def test_bias_csv_layout():
    cfg = SimConfig(20, 20, ArmHazards(0.1, 0.05), ArmHazards(0.1, 0.05), Censoring("uniform", 15), seed=1,
                    replications=2)
    report = run_bias_study(cfg)
    lines = report.to_csv().splitlines()
    assert tuple(lines[0].split(",")) == BIAS_COLUMNS
    assert len(lines) == 1 + 2 * 15
    assert report.summary_csv().splitlines()[0].startswith("estimator,ratio_truth_mean")
