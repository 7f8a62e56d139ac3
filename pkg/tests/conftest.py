from fractions import Fraction

import numpy as np
import pytest

from aerisk import AnalysisSet, ArmHazards, Censoring, SimConfig, simulate_trial

D1_CSV = "patient_id,arm,time,event_code\np1,E,1,1\np2,E,2,2\np3,C,3,0\np4,C,4,1\n"


@pytest.fixture
def d1():
    """Four records: AE at 1, CE at 2, censored at 3, AE at 4."""
    return AnalysisSet(["p1", "p2", "p3", "p4"], [1, 1, 0, 0], [1, 2, 3, 4], [1, 2, 0, 1])


def exact_competing_risks(time, code, tau):
    """Rational-arithmetic product-limit oracle.

    Walks distinct times one by one with explicit risk sets; no shared code
    with the library. Returns (ip, one_minus_km, cif_ae, cif_ce, surv).
    """
    recs = sorted(zip(time, code))
    n = len(recs)
    surv = km = Fraction(1)
    cif_ae = cif_ce = Fraction(0)
    for t in sorted({r[0] for r in recs}):
        if t > tau:
            break
        at_risk = sum(1 for r in recs if r[0] >= t)
        d_ae = sum(1 for r in recs if r[0] == t and r[1] == 1)
        d_ce = sum(1 for r in recs if r[0] == t and r[1] >= 2)
        cif_ae += surv * Fraction(d_ae, at_risk)
        cif_ce += surv * Fraction(d_ce, at_risk)
        surv *= 1 - Fraction(d_ae + d_ce, at_risk)
        km *= 1 - Fraction(d_ae, at_risk)
    ip = Fraction(sum(1 for t, c in recs if c == 1 and t <= tau), n)
    return ip, 1 - km, cif_ae, cif_ce, surv


def random_set(rng, n, n_codes=2, tie_grid=None):
    """Random dataset; ``tie_grid`` rounds times to force ties."""
    t = rng.exponential(10.0, n) + 0.01
    if tie_grid:
        t = np.ceil(t / tie_grid) * tie_grid
    code = rng.integers(0, 2 + n_codes, n)
    arm = rng.integers(0, 2, n)
    ce = tuple(range(2, 2 + n_codes))
    return AnalysisSet([f"id{k}" for k in range(n)], arm, t, code, ce)


@pytest.fixture
def sim_trial():
    cfg = SimConfig(150, 150, ArmHazards(0.02, 0.01), ArmHazards(0.01, 0.01),
                    Censoring("uniform", 100.0), seed=11)
    return simulate_trial(cfg, 0)


def graded_censoring_trials(k=20, n=200, seed=100, replicates=200):
    """Exported summaries of ``k`` trials with graded censoring.

    Trials model increasingly frail populations: both the dropout rate and
    the death hazard rise from trial to trial (AE hazard fixed at 0.02/day,
    study end at day 100). Higher censoring thus goes with a wider gap
    between one minus Kaplan-Meier and the AJE.
    """
    from aerisk import BootstrapConfig, max_evaluation_time, summarize_trial

    rows = []
    for j in range(k):
        h = ArmHazards(0.02, 0.04 * j / (k - 1))
        dropout = Censoring("exponential", 0.002 + 0.028 * j / (k - 1))
        trial = simulate_trial(SimConfig(n, n, h, h, dropout, seed=seed + j, follow_up=100.0))
        tau = max_evaluation_time(trial)
        rows.append(summarize_trial(f"T{j:02d}", "AE1", trial, tau, BootstrapConfig(replicates, seed=seed + j)))
    return rows


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
