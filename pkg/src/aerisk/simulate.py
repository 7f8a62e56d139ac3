"""Constant-hazard competing-risks trial generator and bias studies against the truth."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .data import DEATH, AnalysisSet, max_evaluation_time, split_by_arm
from .one_sample import METHODS, Method, all_estimates

_TINY = np.nextafter(0.0, 1.0)
CENSORING_KINDS = ("none", "administrative", "uniform", "exponential")


@dataclass(frozen=True)
class ArmHazards:
    ae_hazard: float
    ce_hazard: float = 0.0

    def __post_init__(self):
        if not self.ae_hazard > 0:
            raise ValueError("AE hazard must be positive")
        if not self.ce_hazard >= 0:
            raise ValueError("CE hazard must be non-negative")


@dataclass(frozen=True)
class Censoring:
    """Random censoring model.

    ``value`` is the cut-off time for ``administrative``, the upper end
    ``c_max`` for ``uniform`` on (0, c_max), and the rate for ``exponential``.
    """

    kind: str = "none"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in CENSORING_KINDS:
            raise ValueError(f"censoring kind must be one of {CENSORING_KINDS}")
        if self.kind != "none" and not self.value > 0:
            raise ValueError(f"{self.kind} censoring needs a positive parameter")

    @classmethod
    def parse(cls, text: str) -> Censoring:
        """``none``, ``administrative:5``, ``uniform:10`` or ``exponential:0.02``."""
        kind, _, value = text.partition(":")
        return cls(kind.strip(), float(value) if value else 0.0)

    def __str__(self):
        return self.kind if self.kind == "none" else f"{self.kind}:{self.value:g}"

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "none":
            return np.full(n, np.inf)
        if self.kind == "administrative":
            return np.full(n, float(self.value))
        if self.kind == "uniform":
            return rng.uniform(0.0, self.value, n)
        return rng.exponential(1.0 / self.value, n)


@dataclass(frozen=True)
class SimConfig:
    n_e: int
    n_c: int
    hazards_e: ArmHazards
    hazards_c: ArmHazards
    censoring: Censoring = field(default_factory=Censoring)
    seed: int = 0
    replications: int = 1
    ce_code: int = DEATH
    follow_up: float = math.inf  # administrative end of study on top of ``censoring``

    def __post_init__(self):
        if self.n_e < 1 or self.n_c < 1:
            raise ValueError("arm sizes must be positive")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if self.ce_code < 2:
            raise ValueError("competing-event code must be >= 2")
        if not self.follow_up > 0:
            raise ValueError("follow-up must be positive")


def true_ae_probability(h: ArmHazards, t: float) -> float:
    """``P(T <= t, AE)`` under constant cause-specific hazards."""
    if t < 0:
        raise ValueError("time must be non-negative")
    total = h.ae_hazard + h.ce_hazard
    if total == 0:
        return 0.0
    return h.ae_hazard / total * -math.expm1(-total * t)


def latent_events(h: ArmHazards, n: int, rng: np.random.Generator):
    """Event times and AE indicators before censoring.

    Total hazard ``a + c`` gives the time; the type is AE with probability
    ``a / (a + c)``.
    """
    total = h.ae_hazard + h.ce_hazard
    t = np.maximum(rng.exponential(1.0 / total, n), _TINY)
    is_ae = rng.random(n) < h.ae_hazard / total
    return t, is_ae


def arm_rng(seed: int, replicate: int, experimental: bool) -> np.random.Generator:
    return np.random.default_rng([int(seed) & ((1 << 64) - 1), int(replicate), int(experimental)])


def simulate_trial(cfg: SimConfig, replicate: int = 0) -> AnalysisSet:
    """One simulated two-arm trial, deterministic in ``(cfg.seed, replicate)``."""
    ids, arms, times, codes = [], [], [], []
    for experimental, n, h in ((True, cfg.n_e, cfg.hazards_e), (False, cfg.n_c, cfg.hazards_c)):
        rng = arm_rng(cfg.seed, replicate, experimental)
        t, is_ae = latent_events(h, n, rng)
        cens = np.maximum(np.minimum(cfg.censoring.draw(rng, n), cfg.follow_up), _TINY)
        observed = t <= cens
        prefix = "E" if experimental else "C"
        ids.append(np.char.add(prefix, np.arange(1, n + 1).astype(str)))
        arms.append(np.full(n, int(experimental), np.int8))
        times.append(np.where(observed, t, cens))
        codes.append(np.where(observed, np.where(is_ae, 1, cfg.ce_code), 0))
    return AnalysisSet(
        np.concatenate(ids), np.concatenate(arms), np.concatenate(times),
        np.concatenate(codes), (cfg.ce_code,), "simulated AE",
    )


BIAS_COLUMNS = ("replicate", "estimator", "tau", "estimate", "truth", "ratio_truth", "ratio_aje")


@dataclass
class BiasReport:
    """Per-replication estimates against the true value and against the AJE.

    Estimator names are ``E:<method>`` and ``C:<method>`` for arm-wise
    probabilities and ``RR:<method>`` for the risk ratio.
    """

    rows: list[tuple] = field(default_factory=list)

    def column(self, estimator: str, name: str) -> np.ndarray:
        k = BIAS_COLUMNS.index(name)
        return np.array([r[k] for r in self.rows if r[1] == estimator], dtype=float)

    @property
    def estimators(self) -> list[str]:
        return list(dict.fromkeys(r[1] for r in self.rows))

    def summary(self) -> list[dict]:
        out = []
        for est in self.estimators:
            entry = {"estimator": est}
            for name in ("ratio_truth", "ratio_aje"):
                vals = self.column(est, name)
                vals = vals[np.isfinite(vals)]
                for stat, fn in (("mean", np.mean), ("median", np.median), ("min", np.min), ("max", np.max)):
                    entry[f"{name}_{stat}"] = float(fn(vals)) if len(vals) else math.nan
                entry[f"{name}_n"] = int(len(vals))
            out.append(entry)
        return out

    def to_csv(self, stream: TextIO | None = None) -> str:
        buf = stream if stream is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(BIAS_COLUMNS)
        for rep, est, *vals in self.rows:
            writer.writerow([rep, est, *(repr(float(v)) for v in vals)])
        return buf.getvalue() if stream is None else ""

    def summary_csv(self, stream: TextIO | None = None) -> str:
        buf = stream if stream is not None else io.StringIO()
        summary = self.summary()
        writer = csv.DictWriter(buf, fieldnames=list(summary[0]) if summary else ["estimator"],
                                lineterminator="\n")
        writer.writeheader()
        for entry in summary:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in entry.items()})
        return buf.getvalue() if stream is None else ""


def _ratio(num, den):
    return num / den if den > 0 and math.isfinite(num) else math.nan


def run_bias_study(cfg: SimConfig, tau_policy="max_observed") -> BiasReport:
    """Estimate every arm-wise probability and risk ratio over ``cfg.replications`` trials.

    ``tau_policy`` is ``"max_observed"`` (latest observed time of each
    simulated trial, shared by both arms) or a fixed number of days.
    """
    report = BiasReport()
    for rep in range(cfg.replications):
        trial = simulate_trial(cfg, rep)
        if tau_policy == "max_observed":
            tau = max_evaluation_time(trial)
        else:
            tau = float(tau_policy)
        arms = split_by_arm(trial)
        est = {}
        for label, data, h in (("E", arms.experimental, cfg.hazards_e), ("C", arms.control, cfg.hazards_c)):
            truth = true_ae_probability(h, tau)
            values = all_estimates(data, tau)
            aje = values[Method.AALEN_JOHANSEN].value
            est[label] = (values, truth)
            for m in METHODS:
                v = values[m].value
                report.rows.append((rep, f"{label}:{m}", tau, v, truth, _ratio(v, truth), _ratio(v, aje)))
        (ve, te), (vc, tc) = est["E"], est["C"]
        rr_truth = te / tc
        rr_aje = _ratio(ve[Method.AALEN_JOHANSEN].value, vc[Method.AALEN_JOHANSEN].value)
        for m in METHODS:
            rr = _ratio(ve[m].value, vc[m].value)
            report.rows.append((rep, f"RR:{m}", tau, rr, rr_truth, _ratio(rr, rr_truth), _ratio(rr, rr_aje)))
    return report
