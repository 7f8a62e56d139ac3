"""Federated summary exchange: patient-free per-trial payloads and central pooling.

Sites run the estimators locally and export :class:`TrialSummary` rows, one
JSON document per trial. The central step validates payloads and pools the
log ratio ``log(estimate / gold_estimate)`` across trials with a
DerSimonian-Laird random-effects model, optionally regressing it on trial
characteristics.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Mapping, Sequence, TextIO

import jsonschema
import numpy as np

from .bootstrap import BootstrapConfig
from .data import AnalysisSet, split_by_arm
from .errors import DataError, SummaryValidationError
from .one_sample import METHODS, Method, ProbabilityEstimate, all_estimates
from .two_sample import arm_bootstrap_replicates

SCHEMA_VERSION = 1
COVARIATES = ("censoring_fraction", "tau", "gold_estimate")
_ARM_ORDER = {"E": 0, "C": 1}
_METHOD_ORDER = {str(m): k for k, m in enumerate(METHODS)}


@dataclass(frozen=True)
class TrialSummary:
    trial_id: str
    ae_id: str
    arm: str
    method: str
    estimate: float
    se: float | None
    tau: float
    n: int
    censoring_fraction: float
    ce_fraction: float
    gold_estimate: float

    def sort_key(self):
        return (self.trial_id, self.ae_id, _ARM_ORDER.get(self.arm, 9), _METHOD_ORDER.get(self.method, 99))


SUMMARY_FIELDS = tuple(f.name for f in fields(TrialSummary))

_fraction = {"type": "number", "minimum": 0, "maximum": 1}
SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["savvy_schema", "trial_id", "summaries"],
    "additionalProperties": False,
    "properties": {
        "savvy_schema": {"const": SCHEMA_VERSION},
        "trial_id": {"type": "string", "minLength": 1},
        "summaries": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": list(SUMMARY_FIELDS),
                "additionalProperties": False,
                "properties": {
                    "trial_id": {"type": "string", "minLength": 1},
                    "ae_id": {"type": "string", "minLength": 1},
                    "arm": {"enum": ["E", "C"]},
                    "method": {"enum": [str(m) for m in METHODS]},
                    "estimate": _fraction,
                    "se": {"type": ["number", "null"], "minimum": 0},
                    "tau": {"type": "number", "exclusiveMinimum": 0},
                    "n": {"type": "integer", "minimum": 1},
                    "censoring_fraction": _fraction,
                    "ce_fraction": _fraction,
                    "gold_estimate": _fraction,
                },
            },
        },
    },
}
_VALIDATOR = jsonschema.Draft202012Validator(SUMMARY_SCHEMA)


@dataclass(frozen=True)
class ArmCharacteristics:
    n: int
    censoring_fraction: float
    ce_fraction: float

    @classmethod
    def of(cls, data: AnalysisSet) -> ArmCharacteristics:
        """Censoring fraction is #censored / n, CE fraction #competing events / n."""
        return cls(len(data), data.censoring_fraction, data.ce_fraction)


def export_summary(
    trial_id: str,
    ae_id: str,
    estimates: Mapping[str, Mapping[Method, ProbabilityEstimate]],
    characteristics: Mapping[str, ArmCharacteristics],
) -> list[TrialSummary]:
    """Flatten per-arm estimates into summary rows; the AJE of each arm is its gold value."""
    rows = []
    for arm, by_method in estimates.items():
        gold = by_method.get(Method.AALEN_JOHANSEN)
        if gold is None:
            raise DataError(f"missing gold (Aalen-Johansen) estimate for arm {arm}")
        ch = characteristics[arm]
        for method, est in by_method.items():
            rows.append(TrialSummary(
                str(trial_id), str(ae_id), str(arm), str(Method(method)), float(est.value),
                None if est.se is None else float(est.se), float(est.tau), int(ch.n),
                float(ch.censoring_fraction), float(ch.ce_fraction), float(gold.value),
            ))
    rows.sort(key=TrialSummary.sort_key)
    return rows


def summarize_trial(trial_id: str, ae_id: str, data: AnalysisSet, tau: float,
                    bootstrap: BootstrapConfig | None = None) -> list[TrialSummary]:
    """Run all estimators per arm on ``data`` and export the summary rows."""
    arms = split_by_arm(data)
    present = {a: s for a, s in (("E", arms.experimental), ("C", arms.control)) if not s.is_empty}
    estimates = {a: all_estimates(s, tau) for a, s in present.items()}
    if bootstrap is not None and len(present) == 2:
        reps = dict(zip(("E", "C"), arm_bootstrap_replicates(arms.experimental, arms.control, tau, bootstrap)))
    elif bootstrap is not None:
        reps = {a: all_estimates(s, tau, bootstrap) for a, s in present.items()}
    else:
        reps = {}
    for arm, by_method in estimates.items():
        for m, est in list(by_method.items()):
            if m is Method.INCIDENCE_PROPORTION or arm not in reps:
                continue
            r = reps[arm][m]
            se = r.se if isinstance(r, ProbabilityEstimate) else float(np.std(r, ddof=1))
            by_method[m] = ProbabilityEstimate(est.value, se, m, est.tau)
    chars = {a: ArmCharacteristics.of(s) for a, s in present.items()}
    return export_summary(trial_id, ae_id, estimates, chars)


def to_payload(summaries: Sequence[TrialSummary]) -> dict:
    trial_ids = {s.trial_id for s in summaries}
    if len(trial_ids) != 1:
        raise DataError("a payload holds exactly one trial")
    return {
        "savvy_schema": SCHEMA_VERSION,
        "trial_id": trial_ids.pop(),
        "summaries": [asdict(s) for s in sorted(summaries, key=TrialSummary.sort_key)],
    }


def dumps_payload(summaries: Sequence[TrialSummary]) -> str:
    return json.dumps(to_payload(summaries), indent=2) + "\n"


def validate_summary(payload) -> list[tuple[str, str]]:
    """Violations as ``(field path, message)``; an empty list means the payload is valid."""
    errors = []
    for err in sorted(_VALIDATOR.iter_errors(payload), key=lambda e: list(map(str, e.absolute_path))):
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            msg = f"unexpected field(s) {extra}; only aggregated fields are allowed"
        elif err.validator == "required":
            msg = err.message.replace("is a required property", "is missing")
        else:
            msg = err.message
        errors.append((path, msg))
    if not errors:
        for k, row in enumerate(payload["summaries"]):
            if row["trial_id"] != payload["trial_id"]:
                errors.append((f"summaries/{k}/trial_id", "does not match the document trial_id"))
    return errors


def _rows_from_payload(payload) -> list[TrialSummary]:
    errors = validate_summary(payload)
    if errors:
        raise SummaryValidationError(errors)
    return [TrialSummary(**row) for row in payload["summaries"]]


def loads_payload(text: str) -> list[TrialSummary]:
    return _rows_from_payload(json.loads(text))


def read_payload(path) -> list[TrialSummary]:
    with open(path, encoding="utf-8") as fh:
        return _rows_from_payload(json.load(fh))


def write_payload(summaries: Sequence[TrialSummary], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_payload(summaries))


def to_csv(summaries: Iterable[TrialSummary], stream: TextIO | None = None) -> str:
    buf = stream if stream is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_FIELDS)
    for s in sorted(summaries, key=TrialSummary.sort_key):
        row = asdict(s)
        writer.writerow(["" if row[f] is None else (repr(row[f]) if isinstance(row[f], float) else row[f])
                         for f in SUMMARY_FIELDS])
    return buf.getvalue() if stream is None else ""


def from_csv(source: TextIO | str) -> list[TrialSummary]:
    if isinstance(source, str):
        source = io.StringIO(source)
    out = []
    for row in csv.DictReader(source):
        out.append(TrialSummary(
            row["trial_id"], row["ae_id"], row["arm"], row["method"], float(row["estimate"]),
            float(row["se"]) if row["se"] else None, float(row["tau"]), int(row["n"]),
            float(row["censoring_fraction"]), float(row["ce_fraction"]), float(row["gold_estimate"]),
        ))
    return out


@dataclass(frozen=True)
class MetaResult:
    pooled_log_ratio: float
    pooled_se: float
    tau2: float
    q: float
    k: int
    excluded: int
    coefficients: dict
    tau2_residual: float

    @property
    def pooled_ratio(self) -> float:
        return math.exp(self.pooled_log_ratio)


def _dl_tau2(y, v, x):
    w = 1.0 / v
    xtwx = x.T @ (w[:, None] * x)
    beta = np.linalg.solve(xtwx, x.T @ (w * y))
    resid = y - x @ beta
    q = float(np.sum(w * resid**2))
    # trace of W - W X (X'WX)^-1 X'W
    trace = float(w.sum() - np.trace(np.linalg.solve(xtwx, x.T @ ((w**2)[:, None] * x))))
    k, p = x.shape
    tau2 = max(0.0, (q - (k - p)) / trace) if trace > 0 else 0.0
    return tau2, q


def _wls(y, v, x, tau2):
    w = 1.0 / (v + tau2)
    cov = np.linalg.inv(x.T @ (w[:, None] * x))
    beta = cov @ (x.T @ (w * y))
    return beta, np.sqrt(np.diag(cov))


def pool_and_regress(summaries: Sequence[TrialSummary], covariates: Sequence[str] = (),
                     method: str | None = None) -> MetaResult:
    """Random-effects pooling and meta-regression of ``log(estimate / gold)``.

    Within-trial variance is ``se**2 / estimate**2``. Rows with a zero
    estimate or gold value, or without a positive standard error, are
    excluded and counted in ``MetaResult.excluded``.
    """
    rows = list(summaries)
    if method is not None:
        rows = [r for r in rows if r.method == str(method)]
    if len({r.method for r in rows}) > 1:
        raise DataError("summaries mix estimators; select one with method=")
    for c in covariates:
        if c not in COVARIATES:
            raise DataError(f"unknown covariate {c!r}; choose from {COVARIATES}")
    rows.sort(key=TrialSummary.sort_key)
    usable = [r for r in rows if r.estimate > 0 and r.gold_estimate > 0 and r.se is not None and r.se > 0]
    excluded = len(rows) - len(usable)
    if len(usable) < 2:
        raise DataError(f"need at least 2 usable summaries, got {len(usable)}")
    y = np.array([math.log(r.estimate / r.gold_estimate) for r in usable])
    v = np.array([(r.se / r.estimate) ** 2 for r in usable])

    ones = np.ones((len(y), 1))
    tau2, q = _dl_tau2(y, v, ones)
    (pooled,), (pooled_se,) = _wls(y, v, ones, tau2)

    coefficients = {"intercept": (float(pooled), float(pooled_se))}
    tau2_res = tau2
    if covariates:
        x = np.column_stack([ones[:, 0]] + [[getattr(r, c) for r in usable] for c in covariates])
        if np.linalg.matrix_rank(x) < x.shape[1] or len(y) <= x.shape[1]:
            raise DataError("collinear covariates or too few trials for the meta-regression")
        tau2_res, _ = _dl_tau2(y, v, x)
        beta, se = _wls(y, v, x, tau2_res)
        coefficients = {name: (float(b), float(s))
                        for name, b, s in zip(("intercept", *covariates), beta, se)}
    return MetaResult(float(pooled), float(pooled_se), float(tau2), float(q), len(y), excluded,
                      coefficients, float(tau2_res))
