"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Tables go to ``--output`` (or stdout); the last stdout line is always a JSON
status record. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__
from .bootstrap import BootstrapConfig
from .categorize import evidence_category, frequency_category
from .data import read_dataset, reclassify_ce, resolve_tau, split_by_arm, write_dataset
from .errors import DataError, ExclusionError, MonotoneLikelihoodError, NumericalError
from .exchange import COVARIATES, pool_and_regress, read_payload, summarize_trial, to_csv, write_payload
from .one_sample import METHODS, all_estimates
from .simulate import ArmHazards, Censoring, SimConfig, run_bias_study, simulate_trial
from .two_sample import cox_hazard_ratio, incidence_density_ratio, risk_ratios

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_set(text):
    try:
        return frozenset(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pair(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW,HIGH, got {text!r}") from None
    return lo, hi


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit_table(header, rows, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _emit_text(buf.getvalue(), path)


def _emit_text(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    data = read_dataset(args.input, None if args.ce_codes is None else sorted(args.ce_codes), args.ae_label)
    if args.ce_keep is not None:
        data = reclassify_ce(data, args.ce_keep)
    return data


def _bootstrap(args, default_b=0):
    b = default_b if args.bootstrap is None else args.bootstrap
    if b == 0:
        return None
    if args.seed is None:
        raise UsageError("--seed is required when bootstrapping")
    return BootstrapConfig(b, args.seed, args.ci_kind, args.level)


def cmd_estimate(args):
    data = _load(args)
    if args.arm != "all":
        parts = split_by_arm(data)
        data = parts.experimental if args.arm == "E" else parts.control
        if data.is_empty:
            raise DataError(f"arm {args.arm} has no patients")
    tau = resolve_tau(data, args.tau)
    est = all_estimates(data, tau, _bootstrap(args))
    rows = [(str(m), est[m].value, est[m].se, tau, frequency_category(est[m]).label) for m in METHODS]
    _emit_table(("method", "value", "se", "tau", "frequency_category"), rows, args.output)
    return {"n": len(data), "tau": tau, "values": {str(m): est[m].value for m in METHODS}}


def cmd_compare(args):
    data = _load(args)
    arms = split_by_arm(data)
    if arms.empty_experimental or arms.empty_control:
        raise DataError("comparison needs patients in both arms")
    tau = resolve_tau(data, args.tau)
    cfg = _bootstrap(args, default_b=999)
    if cfg is None:
        raise UsageError("compare needs --bootstrap >= 2")
    rows = []

    def add(effect_name, method, kind, result):
        if isinstance(result, Exception):
            rows.append((effect_name, method, kind, None, None, None, "", str(result)))
        else:
            rows.append((effect_name, method, kind, result.point, result.ci_low, result.ci_high,
                         evidence_category(result).label, ""))

    for method, result in risk_ratios(arms.experimental, arms.control, tau, cfg, args.level).items():
        add("RR", str(method), "AE", result)
    kinds = ["AE", "CE"] + sorted(data.ce_codes)
    for kind in kinds:
        try:
            result = incidence_density_ratio(arms.experimental, arms.control, tau, kind, args.level)
        except ExclusionError as exc:
            result = exc
        add("IDR", "incidence_density", str(kind), result)
    for kind in kinds:
        try:
            result = cox_hazard_ratio(arms.experimental, arms.control, kind, args.level)
        except (MonotoneLikelihoodError, DataError) as exc:
            result = exc
        add("HR", "cox", str(kind), result)
    _emit_table(("effect", "method", "event_kind", "point", "ci_low", "ci_high", "category", "note"),
                rows, args.output)
    return {"tau": tau, "effects": len(rows)}


def cmd_categorize(args):
    if (args.p is None) == (args.ci is None):
        raise UsageError("give either --p or --ci (with optional --rr)")
    if args.p is not None:
        label = frequency_category(args.p).label
    else:
        lo, hi = args.ci
        label = evidence_category(ci_low=lo, ci_high=hi, point=args.rr).label
    sys.stdout.write(label + "\n")
    return {"category": label}


def _sim_config(args, replications=1):
    return SimConfig(
        args.n_e, args.n_c, ArmHazards(args.ae_e, args.ce_e), ArmHazards(args.ae_c, args.ce_c),
        Censoring.parse(args.censoring), args.seed, replications, follow_up=args.follow_up,
    )


def cmd_simulate(args):
    trial = simulate_trial(_sim_config(args), args.replicate)
    buf = io.StringIO()
    write_dataset(trial, buf)
    _emit_text(buf.getvalue(), args.output)
    return {"n": len(trial)}


def cmd_bias_study(args):
    tau = "max_observed" if args.tau == "max" else float(args.tau)
    report = run_bias_study(_sim_config(args, args.replications), tau)
    _emit_text(report.to_csv(), args.output)
    if args.summary:
        _emit_text(report.summary_csv(), args.summary)
    return {"replications": args.replications, "rows": len(report.rows)}


def cmd_export_summary(args):
    data = _load(args)
    tau = resolve_tau(data, args.tau)
    rows = summarize_trial(args.trial_id, args.ae_id, data, tau, _bootstrap(args, default_b=999))
    write_payload(rows, args.output)
    if args.csv:
        _emit_text(to_csv(rows), args.csv)
    return {"rows": len(rows), "tau": tau}


def cmd_meta(args):
    rows = []
    for path in args.inputs:
        rows.extend(read_payload(path))
    result = pool_and_regress(rows, args.covariates, args.method)
    doc = {
        "method": args.method,
        "k": result.k,
        "excluded": result.excluded,
        "pooled_log_ratio": result.pooled_log_ratio,
        "pooled_ratio": result.pooled_ratio,
        "pooled_se": result.pooled_se,
        "tau2": result.tau2,
        "q": result.q,
        "tau2_residual": result.tau2_residual,
        "coefficients": {k: {"estimate": b, "se": s} for k, (b, s) in result.coefficients.items()},
    }
    _emit_text(json.dumps(doc, indent=2) + "\n", args.output)
    return {"k": result.k, "pooled_ratio": result.pooled_ratio}


def _data_options(p):
    p.add_argument("--input", required=True, help="CSV with patient_id,arm,time,event_code")
    p.add_argument("--tau", default="max", help="evaluation time in days, or 'max' (default)")
    p.add_argument("--ce-codes", type=_int_set, default=None,
                   help="competing-event codes (default: every code >= 2 in the file)")
    p.add_argument("--ce-keep", type=_int_set, default=None,
                   help="CE codes kept as competing; others become censored (e.g. 2 for death only)")
    p.add_argument("--ae-label", default="AE")


def _bootstrap_options(p):
    p.add_argument("--bootstrap", type=int, default=None, metavar="B", help="bootstrap replicates")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ci-kind", choices=("percentile", "log-normal"), default="percentile")
    p.add_argument("--level", type=float, default=0.95)


def _sim_options(p):
    p.add_argument("--n-e", type=int, required=True)
    p.add_argument("--n-c", type=int, required=True)
    p.add_argument("--ae-e", type=float, required=True, help="AE hazard per day, experimental")
    p.add_argument("--ce-e", type=float, default=0.0)
    p.add_argument("--ae-c", type=float, required=True)
    p.add_argument("--ce-c", type=float, default=0.0)
    p.add_argument("--censoring", default="none",
                   help="none | administrative:T | uniform:CMAX | exponential:RATE")
    p.add_argument("--follow-up", type=float, default=float("inf"),
                   help="administrative end of study in days (default: none)")
    p.add_argument("--seed", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aerisk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"aerisk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="one-sample AE probability, all five estimators")
    _data_options(p)
    _bootstrap_options(p)
    p.add_argument("--arm", choices=("all", "E", "C"), default="all")
    p.add_argument("--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="risk ratios, incidence-density ratios and Cox HRs")
    _data_options(p)
    _bootstrap_options(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("categorize", help="frequency or evidence category")
    p.add_argument("--p", type=float, help="absolute AE probability")
    p.add_argument("--rr", type=float, help="point estimate of the relative effect")
    p.add_argument("--ci", type=_pair, help="confidence interval LOW,HIGH")
    p.set_defaults(func=cmd_categorize)

    p = sub.add_parser("simulate", help="simulate one constant-hazard trial")
    _sim_options(p)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bias-study", help="estimator / truth and estimator / AJE ratios")
    _sim_options(p)
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--tau", default="max")
    p.add_argument("--output")
    p.add_argument("--summary", help="also write per-estimator ratio summaries here")
    p.set_defaults(func=cmd_bias_study)

    p = sub.add_parser("export-summary", help="write the patient-free per-trial JSON payload")
    _data_options(p)
    _bootstrap_options(p)
    p.add_argument("--trial-id", required=True)
    p.add_argument("--ae-id", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--csv", help="flat CSV mirror of the payload")
    p.set_defaults(func=cmd_export_summary)

    p = sub.add_parser("meta", help="pool summary payloads against the AJE")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--method", required=True, choices=[str(m) for m in METHODS])
    p.add_argument("--covariates", type=lambda s: [c for c in s.split(",") if c], default=[],
                   help=f"comma-separated subset of {','.join(COVARIATES)}")
    p.add_argument("--output")
    p.set_defaults(func=cmd_meta)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    status = {"command": args.command}
    try:
        info = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"aerisk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as exc:
        print(f"aerisk: data error: {exc}", file=sys.stderr)
        print(json.dumps({**status, "status": "data_error"}))
        return EXIT_DATA
    except NumericalError as exc:
        print(f"aerisk: numerical failure: {exc}", file=sys.stderr)
        print(json.dumps({**status, "status": "numerical_error"}))
        return EXIT_NUMERIC
    print(json.dumps({**status, "status": "ok", **info}))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
