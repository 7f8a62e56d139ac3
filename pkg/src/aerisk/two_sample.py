"""Relative AE-risk effects between arms: risk ratios and hazard ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .bootstrap import BootstrapConfig, BootstrapResult, bootstrap_ci, resample_weights, z_value
from .data import AnalysisSet
from .errors import ConvergenceError, DataError, ExclusionError, MonotoneLikelihoodError
from .kernels import cox_tables, cr_summary
from .one_sample import Method, ProbabilityEstimate, all_estimates, estimates_from_summary

__all__ = [
    "RelativeEffect",
    "CoxFit",
    "risk_ratio",
    "incidence_density_ratio",
    "fit_cox_two_group",
    "cox_hazard_ratio",
    "bootstrap_ci",
    "BootstrapConfig",
    "BootstrapResult",
    "arm_bootstrap_replicates",
    "risk_ratios",
]


@dataclass(frozen=True)
class RelativeEffect:
    point: float
    ci_low: float
    ci_high: float
    level: float = 0.95
    scale: str = "RR"  # "RR" or "HR"
    method: str = ""
    event_kind: str = "AE"
    se_log: float | None = None

    def __post_init__(self):
        if not (self.ci_low <= self.point <= self.ci_high):
            raise ValueError("confidence interval does not contain the point estimate")

    def reciprocal(self) -> RelativeEffect:
        return RelativeEffect(
            1.0 / self.point, 1.0 / self.ci_high, 1.0 / self.ci_low,
            self.level, self.scale, self.method, self.event_kind, self.se_log,
        )


def _log_interval(point, se_log, level):
    z = z_value(level)
    return point * math.exp(-z * se_log), point * math.exp(z * se_log)


def risk_ratio(q_e: ProbabilityEstimate, q_c: ProbabilityEstimate, level: float = 0.95) -> RelativeEffect:
    """``q_e / q_c`` with a delta-rule interval on the log scale.

    Raises :class:`ExclusionError` when either probability is zero, such AEs
    do not enter a risk-ratio analysis.
    """
    if q_e.method != q_c.method or q_e.tau != q_c.tau:
        raise ValueError("risk ratio needs estimates of the same method at the same time")
    if q_e.value <= 0 or q_c.value <= 0:
        raise ExclusionError("AE excluded from RR analysis: zero estimated probability in an arm")
    if q_e.se is None or q_c.se is None:
        raise ValueError("delta-rule interval needs standard errors in both arms")
    point = q_e.value / q_c.value
    se_log = math.sqrt((q_e.se / q_e.value) ** 2 + (q_c.se / q_c.value) ** 2)
    lo, hi = _log_interval(point, se_log, level)
    return RelativeEffect(point, lo, hi, level, "RR", str(q_e.method), "AE", se_log)


def _kind_code(kind):
    if kind in ("AE", "CE"):
        return kind
    return int(kind)


def _events(data: AnalysisSet, kind):
    """Event indicator for ``kind``: "AE", "CE" (any competing event) or one CE code."""
    kind = _kind_code(kind)
    if kind == "AE":
        return data.kind == 1
    if kind == "CE":
        return data.kind == 2
    if kind not in data.ce_codes:
        raise DataError(f"{kind} is not a competing-event code")
    return data.event_code == kind


def incidence_density_ratio(set_e: AnalysisSet, set_c: AnalysisSet, tau, kind="AE", level=0.95) -> RelativeEffect:
    """Ratio of arm-wise incidence densities on ``[0, tau]``.

    The log-scale interval uses variance ``1/d_E + 1/d_C`` (Poisson event
    counts).
    """
    tau = float(tau)
    counts = []
    for data in (set_e, set_c):
        ev = _events(data, kind) & (data.time <= tau)
        d = int(np.count_nonzero(ev))
        if d == 0:
            raise ExclusionError(f"no {kind} events in an arm; incidence density ratio undefined")
        counts.append((d, float(np.minimum(data.time, tau).sum())))
    (d_e, pt_e), (d_c, pt_c) = counts
    point = (d_e / pt_e) / (d_c / pt_c)
    se_log = math.sqrt(1.0 / d_e + 1.0 / d_c)
    lo, hi = _log_interval(point, se_log, level)
    return RelativeEffect(point, lo, hi, level, "HR", "incidence_density", str(kind), se_log)


@dataclass(frozen=True)
class CoxFit:
    beta: float
    se: float
    score: float
    loglik: float
    loglik_null: float
    iterations: int


def _cox_terms(beta, d, d_exp, r_exp, r_ctl):
    with np.errstate(divide="ignore"):
        log_re = np.log(r_exp)
        log_rc = np.log(r_ctl)
    p = expit(beta + log_re - log_rc)
    loglik = beta * d_exp.sum() - (d * np.logaddexp(beta + log_re, log_rc)).sum()
    score = d_exp.sum() - (d * p).sum()
    info = (d * p * (1.0 - p)).sum()
    return loglik, score, info


def fit_cox_two_group(time, event, group, weight=None, tol=1e-10, max_iter=50) -> CoxFit:
    """Two-group Cox model via Newton-Raphson with Breslow ties.

    ``time`` must be sorted ascending; ``group`` is 1 for experimental. Starts
    at beta = 0 and halves the step whenever the log partial likelihood drops.
    """
    time = np.asarray(time, dtype=float)
    if weight is None:
        weight = np.ones_like(time)
    d, d_exp, r_exp, r_ctl = cox_tables(time, event, group, weight)
    if d.sum() == 0:
        raise DataError("no events; Cox model undefined")
    # limits of the (decreasing) score as beta -> +inf / -inf
    if d_exp.sum() - d[r_exp > 0].sum() >= 0:
        raise MonotoneLikelihoodError("monotone likelihood: hazard ratio diverges to infinity", +1)
    if d_exp.sum() - d[r_ctl == 0].sum() <= 0:
        raise MonotoneLikelihoodError("monotone likelihood: hazard ratio collapses to zero", -1)

    beta = 0.0
    loglik, score, info = _cox_terms(beta, d, d_exp, r_exp, r_ctl)
    loglik_null = loglik
    for it in range(1, max_iter + 1):
        step = score / info
        for _ in range(60):
            cand = _cox_terms(beta + step, d, d_exp, r_exp, r_ctl)
            if cand[0] >= loglik - 1e-12 * abs(loglik):
                break
            step /= 2.0
        beta += step
        loglik, score, info = cand
        if abs(score) < tol:
            return CoxFit(beta, 1.0 / math.sqrt(info), score, loglik, loglik_null, it)
    raise ConvergenceError(f"Cox Newton-Raphson did not converge in {max_iter} iterations (score {score:.3g})")


def _merge(set_e: AnalysisSet, set_c: AnalysisSet, kind):
    time = np.concatenate([set_e.time, set_c.time])
    event = np.concatenate([_events(set_e, kind), _events(set_c, kind)])
    group = np.concatenate([np.ones(len(set_e), np.int8), np.zeros(len(set_c), np.int8)])
    order = np.argsort(time, kind="stable")
    return time[order], event[order], group[order]


def cox_hazard_ratio(set_e: AnalysisSet, set_c: AnalysisSet, kind="AE", level=0.95, **fit_options) -> RelativeEffect:
    """Cox hazard ratio (experimental vs control) for the cause-specific hazard of ``kind``.

    Events of other types count as censored at their time. The interval is
    Wald on the log scale from the observed information.
    """
    fit = fit_cox_two_group(*_merge(set_e, set_c, kind), **fit_options)
    point = math.exp(fit.beta)
    lo, hi = _log_interval(point, fit.se, level)
    return RelativeEffect(point, lo, hi, level, "HR", "cox", str(kind), fit.se)


def arm_bootstrap_replicates(set_e: AnalysisSet, set_c: AnalysisSet, tau, cfg: BootstrapConfig):
    """Joint bootstrap of both arms; every estimator's replicates per arm.

    Row ``r`` of both arms comes from the same replicate stream that
    :func:`bootstrap_ci` uses, so the two routes see identical resamples.
    """
    w_e, w_c = resample_weights((len(set_e), len(set_c)), cfg)
    rep_e = estimates_from_summary(cr_summary(set_e.time, set_e.kind, w_e, tau), tau)
    rep_c = estimates_from_summary(cr_summary(set_c.time, set_c.kind, w_c, tau), tau)
    return rep_e, rep_c


def risk_ratios(set_e: AnalysisSet, set_c: AnalysisSet, tau, cfg: BootstrapConfig, level=0.95):
    """Delta-rule risk ratio for every probability estimator.

    Standard errors come from one joint bootstrap of both arms, except for the
    incidence proportion which uses its binomial standard error. Excluded AEs
    (zero probability in an arm) map to the raised :class:`ExclusionError`.
    """
    tau = float(tau)
    rep_e, rep_c = arm_bootstrap_replicates(set_e, set_c, tau, cfg)
    est_e = all_estimates(set_e, tau)
    est_c = all_estimates(set_c, tau)
    out = {}
    for method in Method:
        q = []
        for est, reps in ((est_e, rep_e), (est_c, rep_c)):
            e = est[method]
            se = e.se if method is Method.INCIDENCE_PROPORTION else float(np.std(reps[method], ddof=1))
            q.append(ProbabilityEstimate(e.value, se, method, tau))
        try:
            out[method] = risk_ratio(q[0], q[1], level)
        except ExclusionError as exc:
            out[method] = exc
    return out
