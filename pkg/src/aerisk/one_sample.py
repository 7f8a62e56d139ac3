"""Arm-wise estimators of the probability of an AE by an evaluation time."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .bootstrap import BootstrapConfig, resample_weights
from .data import AnalysisSet
from .errors import DataError
from .kernels import cr_summary


class Method(str, Enum):
    INCIDENCE_PROPORTION = "incidence_proportion"
    ID_TRANSFORM = "id_transform"
    ID_TRANSFORM_CE = "id_transform_ce"
    ONE_MINUS_KM = "one_minus_km"
    AALEN_JOHANSEN = "aalen_johansen"

    def __str__(self):
        return self.value


METHODS = tuple(Method)


@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    se: float | None
    method: Method
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"probability {self.value} outside [0, 1]")
        if self.se is not None and not self.se >= 0:
            raise ValueError("standard error must be non-negative")


@dataclass(frozen=True)
class HazardRate:
    rate: float
    events: float
    persontime: float
    event_kind: str  # "AE" or "CE"


@dataclass(frozen=True)
class StepCurve:
    """Right-continuous step function with value ``start`` before the first jump."""

    times: np.ndarray
    values: np.ndarray
    start: float

    def __call__(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        vals = np.where(idx >= 0, self.values[np.maximum(idx, 0)], self.start)
        return float(vals) if np.ndim(vals) == 0 else vals


class AalenJohansen(NamedTuple):
    ae: ProbabilityEstimate
    ce: ProbabilityEstimate
    allcause_survival: StepCurve


def _check_tau(tau):
    tau = float(tau)
    if not (math.isfinite(tau) and tau > 0):
        raise DataError(f"evaluation time must be positive, got {tau}")
    return tau


def _summary(data: AnalysisSet, tau: float, weights=None) -> np.ndarray:
    if weights is None:
        weights = np.ones((1, len(data)))
    return cr_summary(data.time, data.kind, weights, tau)


def estimates_from_summary(summary: np.ndarray, tau: float) -> dict[Method, np.ndarray]:
    """All five probability estimators from :func:`kernels.cr_summary` rows."""
    n, n_ae, n_ce, ptime, km, cif_ae = (summary[:, k] for k in range(6))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(ptime > 0, n_ae / ptime, 0.0)
        c = np.where(ptime > 0, n_ce / ptime, 0.0)
        total = a + c
        with_ce = np.where(total > 0, a / total * -np.expm1(-total * tau), 0.0)
    return {
        Method.INCIDENCE_PROPORTION: n_ae / n,
        Method.ID_TRANSFORM: -np.expm1(-a * tau),
        Method.ID_TRANSFORM_CE: with_ce,
        Method.ONE_MINUS_KM: 1.0 - km,
        Method.AALEN_JOHANSEN: cif_ae,
    }


def bootstrap_replicates(data: AnalysisSet, tau, cfg: BootstrapConfig) -> dict[Method, np.ndarray]:
    """Bootstrap distribution of every estimator, resampling patients of ``data``."""
    tau = _check_tau(tau)
    (weights,) = resample_weights((len(data),), cfg)
    return estimates_from_summary(_summary(data, tau, weights), tau)


def all_estimates(data: AnalysisSet, tau, bootstrap: BootstrapConfig | None = None):
    """Every estimator at ``tau`` in one pass.

    The incidence proportion carries its binomial standard error; the others
    get a bootstrap standard error when ``bootstrap`` is given.
    """
    tau = _check_tau(tau)
    if data.is_empty:
        raise DataError("empty input")
    point = estimates_from_summary(_summary(data, tau), tau)
    reps = bootstrap_replicates(data, tau, bootstrap) if bootstrap is not None else None
    out = {}
    for method, value in point.items():
        v = float(np.clip(value[0], 0.0, 1.0))
        if method is Method.INCIDENCE_PROPORTION:
            se = math.sqrt(v * (1.0 - v) / len(data))
        elif reps is not None:
            se = float(np.std(reps[method], ddof=1))
        else:
            se = None
        out[method] = ProbabilityEstimate(v, se, method, tau)
    return out


def incidence_proportion(data: AnalysisSet, tau) -> ProbabilityEstimate:
    """Share of patients with an observed AE on ``[0, tau]``."""
    tau = _check_tau(tau)
    if data.is_empty:
        raise DataError("empty input")
    n = len(data)
    p = int(np.count_nonzero((data.kind == 1) & (data.time <= tau))) / n
    return ProbabilityEstimate(p, math.sqrt(p * (1.0 - p) / n), Method.INCIDENCE_PROPORTION, tau)


def incidence_density(data: AnalysisSet, tau, kind: str = "AE") -> HazardRate:
    """Events of ``kind`` per day of follow-up, with follow-up truncated at ``tau``."""
    tau = _check_tau(tau)
    code = {"AE": 1, "CE": 2}[kind]
    events = int(np.count_nonzero((data.kind == code) & (data.time <= tau)))
    ptime = float(np.minimum(data.time, tau).sum())
    if ptime <= 0:
        raise DataError("zero person-time at risk")
    return HazardRate(events / ptime, events, ptime, kind)


def prob_transform_ignoring_ce(ae_rate: HazardRate, tau) -> ProbabilityEstimate:
    """``1 - exp(-rate * tau)``: AE probability under a constant hazard with no CEs."""
    if ae_rate.event_kind != "AE":
        raise ValueError("expected an AE hazard")
    tau = _check_tau(tau)
    return ProbabilityEstimate(-math.expm1(-ae_rate.rate * tau), None, Method.ID_TRANSFORM, tau)


def prob_transform_with_ce(ae_rate: HazardRate, ce_rate: HazardRate, tau) -> ProbabilityEstimate:
    """Constant-hazard AE probability with the CE hazard competing."""
    if ae_rate.event_kind != "AE" or ce_rate.event_kind != "CE":
        raise ValueError("expected an AE hazard and a CE hazard")
    tau = _check_tau(tau)
    a, c = ae_rate.rate, ce_rate.rate
    total = a + c
    value = a / total * -math.expm1(-total * tau) if total > 0 else 0.0
    return ProbabilityEstimate(value, None, Method.ID_TRANSFORM_CE, tau)


def one_minus_km(data: AnalysisSet, tau, bootstrap: BootstrapConfig | None = None) -> ProbabilityEstimate:
    """One minus Kaplan-Meier for time to AE, competing events counted as censored."""
    return all_estimates(data, tau, bootstrap)[Method.ONE_MINUS_KM]


def curves(data: AnalysisSet):
    """All-cause survival, AE and CE cumulative incidence, and AE Kaplan-Meier survival.

    Returns four :class:`StepCurve` objects jumping at the distinct event
    times (of any type).
    """
    t = data.time
    if len(t) == 0:
        empty = np.zeros(0)
        return (StepCurve(empty, empty, 1.0), StepCurve(empty, empty, 0.0),
                StepCurve(empty, empty, 0.0), StepCurve(empty, empty, 1.0))
    starts = np.flatnonzero(np.r_[True, t[1:] != t[:-1]])
    utime = t[starts]
    d_ae = np.add.reduceat((data.kind == 1).astype(float), starts)
    d_ce = np.add.reduceat((data.kind == 2).astype(float), starts)
    at_risk = np.cumsum(np.diff(np.r_[starts, len(t)])[::-1])[::-1].astype(float)
    surv = np.cumprod(1.0 - (d_ae + d_ce) / at_risk)
    before = np.r_[1.0, surv[:-1]]
    cif_ae = np.cumsum(before * d_ae / at_risk)
    cif_ce = np.cumsum(before * d_ce / at_risk)
    km = np.cumprod(1.0 - d_ae / at_risk)
    jump = (d_ae + d_ce) > 0
    times = utime[jump]
    return (
        StepCurve(times, surv[jump], 1.0),
        StepCurve(times, cif_ae[jump], 0.0),
        StepCurve(times, cif_ce[jump], 0.0),
        StepCurve(times, km[jump], 1.0),
    )


def aalen_johansen(data: AnalysisSet, tau, bootstrap: BootstrapConfig | None = None) -> AalenJohansen:
    """Aalen-Johansen cumulative incidence of the AE and of the pooled CEs at ``tau``."""
    tau = _check_tau(tau)
    if data.is_empty:
        raise DataError("empty input")
    summary = _summary(data, tau)[0]
    se_ae = se_ce = None
    if bootstrap is not None:
        (weights,) = resample_weights((len(data),), bootstrap)
        reps = _summary(data, tau, weights)
        se_ae = float(np.std(reps[:, 5], ddof=1))
        se_ce = float(np.std(reps[:, 6], ddof=1))
    surv = curves(data)[0]
    return AalenJohansen(
        ProbabilityEstimate(float(np.clip(summary[5], 0, 1)), se_ae, Method.AALEN_JOHANSEN, tau),
        ProbabilityEstimate(float(np.clip(summary[6], 0, 1)), se_ce, Method.AALEN_JOHANSEN, tau),
        surv,
    )
