import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from aerisk import (
    AnalysisSet,
    ArmHazards,
    BootstrapConfig,
    ExclusionError,
    Method,
    MonotoneLikelihoodError,
    ProbabilityEstimate,
    SimConfig,
    cox_hazard_ratio,
    incidence_density_ratio,
    risk_ratio,
    simulate_trial,
    split_by_arm,
)
from aerisk.two_sample import _merge, fit_cox_two_group, risk_ratios

from conftest import random_set


def _q(value, se, method=Method.AALEN_JOHANSEN, tau=10.0):
    return ProbabilityEstimate(value, se, method, tau)


def test_risk_ratio_identical_arms():
    rr = risk_ratio(_q(0.3, 0.05), _q(0.3, 0.05))
    assert rr.point == 1.0 and rr.ci_low < 1 < rr.ci_high


def test_risk_ratio_delta_rule():
    rr = risk_ratio(_q(0.2, 0.02), _q(0.1, 0.01))
    assert rr.point == pytest.approx(2.0)
    # hand arithmetic with z = 1.96
    assert rr.ci_low == pytest.approx(math.exp(math.log(2) - 1.96 * math.sqrt(0.02)), abs=2e-3)
    assert rr.ci_high == pytest.approx(math.exp(math.log(2) + 1.96 * math.sqrt(0.02)), abs=2e-3)
    # frozen from the formula with the exact normal quantile
    assert rr.ci_low == pytest.approx(1.5158349597, abs=1e-9)
    assert rr.ci_high == pytest.approx(2.6388097031, abs=1e-9)


def test_risk_ratio_zero_is_excluded():
    with pytest.raises(ExclusionError, match="excluded from RR"):
        risk_ratio(_q(0.2, 0.02), _q(0.0, 0.0))
    with pytest.raises(ExclusionError):
        risk_ratio(_q(0.0, 0.0), _q(0.2, 0.02))


def test_risk_ratio_requires_matching_estimates():
    with pytest.raises(ValueError):
        risk_ratio(_q(0.2, 0.02), _q(0.1, 0.01, Method.ONE_MINUS_KM))
    with pytest.raises(ValueError):
        risk_ratio(_q(0.2, None), _q(0.1, 0.01))


def _arm(prefix, arm, times, codes):
    return AnalysisSet([f"{prefix}{k}" for k in range(len(times))], [arm] * len(times), times, codes)


def test_incidence_density_ratio_hand_example():
    e = _arm("e", 1, [4.0, 6.0], [1, 1])
    c = _arm("c", 0, [5.0, 5.0], [1, 0])
    idr = incidence_density_ratio(e, c, 10.0)
    assert idr.point == pytest.approx(2.0)
    assert idr.ci_low == pytest.approx(math.exp(math.log(2) - 1.96 * math.sqrt(1.5)), rel=2e-3)
    assert idr.ci_low == pytest.approx(0.1813532200, abs=1e-9)
    assert idr.ci_high == pytest.approx(22.056404621, abs=1e-8)
    swapped = incidence_density_ratio(c, e, 10.0)
    assert swapped.point == pytest.approx(0.5)
    assert swapped.ci_low == pytest.approx(1 / idr.ci_high)
    assert incidence_density_ratio(e, e, 10.0).point == 1.0
    with pytest.raises(ExclusionError):
        incidence_density_ratio(e, _arm("z", 0, [3.0], [0]), 10.0)


def brute_force_cox_loglik(beta, time, event, group):
    """Breslow partial log-likelihood by explicit risk-set sums."""
    ll = 0.0
    for t in sorted(set(time[event])):
        dying = [i for i in range(len(time)) if time[i] == t and event[i]]
        risk = [i for i in range(len(time)) if time[i] >= t]
        ll += sum(beta * group[i] for i in dying)
        ll -= len(dying) * math.log(sum(math.exp(beta * group[i]) for i in risk))
    return ll


def test_cox_desk_check():
    e = _arm("e", 1, [1.0, 3.0], [1, 0])
    c = _arm("c", 0, [2.0, 4.0], [1, 1])
    hr = cox_hazard_ratio(e, c)
    assert hr.point == pytest.approx(math.sqrt(2), abs=1e-10)
    assert cox_hazard_ratio(c, e).point == pytest.approx(1 / math.sqrt(2), abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_cox_matches_brute_force_optimum(seed):
    rng = np.random.default_rng(seed)
    e = random_set(rng, 40, tie_grid=2.0)
    c = random_set(rng, 35, tie_grid=2.0)
    time, event, group = _merge(e, c, "AE")
    fit = fit_cox_two_group(time, event, group)
    res = minimize_scalar(lambda b: -brute_force_cox_loglik(b, time, event, group),
                          bounds=(-5, 5), method="bounded", options={"xatol": 1e-10})
    assert fit.beta == pytest.approx(res.x, abs=1e-6)
    assert abs(fit.score) < 1e-8
    assert fit.loglik >= fit.loglik_null
    assert fit.loglik == pytest.approx(brute_force_cox_loglik(fit.beta, time, event, group), abs=1e-9)


def test_cox_identical_arms():
    e = _arm("e", 1, [1.0, 2.0, 3.0, 5.0], [1, 0, 1, 2])
    c = _arm("c", 0, [1.0, 2.0, 3.0, 5.0], [1, 0, 1, 2])
    assert cox_hazard_ratio(e, c).point == pytest.approx(1.0, abs=1e-12)


def test_cox_monotone_likelihood():
    e = _arm("e", 1, [1.0, 2.0], [1, 1])
    c = _arm("c", 0, [3.0, 4.0], [0, 0])
    with pytest.raises(MonotoneLikelihoodError) as info:
        cox_hazard_ratio(e, c)
    assert info.value.direction == 1
    with pytest.raises(MonotoneLikelihoodError) as info:
        cox_hazard_ratio(c, e)
    assert info.value.direction == -1


def test_cox_event_kinds_censor_each_other():
    e = _arm("e", 1, [1.0, 2.0, 3.0, 4.0], [1, 2, 1, 2])
    c = _arm("c", 0, [1.5, 2.5, 3.5, 4.5], [2, 1, 2, 0])
    ae = cox_hazard_ratio(e, c, "AE")
    ce = cox_hazard_ratio(e, c, "CE")
    assert cox_hazard_ratio(e, c, 2).point == pytest.approx(ce.point)
    assert ae.point != ce.point


def test_large_sample_hr_and_idr():
    cfg = SimConfig(5000, 5000, ArmHazards(0.2), ArmHazards(0.1), seed=20)
    trial = simulate_trial(cfg)
    e, c = split_by_arm(trial)
    hr = cox_hazard_ratio(e, c)
    idr = incidence_density_ratio(e, c, float(trial.time[-1]))
    assert 1.9 <= hr.point <= 2.1
    assert 1.9 <= idr.point <= 2.1
    assert abs(hr.point / idr.point - 1) < 0.05


pairs = st.builds(
    lambda seed: tuple(random_set(np.random.default_rng(seed), n) for n in (30, 25)),
    st.integers(0, 2**32 - 1),
)


@settings(max_examples=40, deadline=None)
@given(pairs, st.floats(0.1, 100.0))
def test_arm_swap_antisymmetry_and_scale_invariance(sets, scale):
    e, c = sets
    tau = 15.0
    for effect in (
        lambda a, b: cox_hazard_ratio(a, b),
        lambda a, b: incidence_density_ratio(a, b, tau),
    ):
        try:
            fwd = effect(e, c)
        except (MonotoneLikelihoodError, ExclusionError):
            continue
        back = effect(c, e)
        assert fwd.point * back.point == pytest.approx(1.0, abs=1e-10)
        assert fwd.ci_low * back.ci_high == pytest.approx(1.0, abs=1e-10)

    def scaled(s):
        return AnalysisSet(s.patient_id, s.arm, s.time * scale, s.event_code, s.ce_codes)

    try:
        assert cox_hazard_ratio(scaled(e), scaled(c)).point == pytest.approx(cox_hazard_ratio(e, c).point, rel=1e-9)
    except MonotoneLikelihoodError:
        pass
    try:
        base = incidence_density_ratio(e, c, tau).point
        assert incidence_density_ratio(scaled(e), scaled(c), tau * scale).point == pytest.approx(base, rel=1e-9)
    except ExclusionError:
        pass


def test_risk_ratios_all_methods(sim_trial):
    e, c = split_by_arm(sim_trial)
    out = risk_ratios(e, c, 50.0, BootstrapConfig(200, seed=3))
    assert set(out) == set(Method)
    for m, rr in out.items():
        assert rr.ci_low <= rr.point <= rr.ci_high
        back = risk_ratios(c, e, 50.0, BootstrapConfig(200, seed=3))[m]
        assert rr.point * back.point == pytest.approx(1.0, abs=1e-10)
