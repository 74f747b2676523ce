"""Command-line driver: audit, calibrate, certify, decide, simulate, and the
population logistic-rescaling counterexample. Machine-readable JSON/CSV out;
exit codes 0 (ok), 2 (input error), 3 (internal error).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional

import numpy as np

from . import calibrate as cal
from . import decision as dec
from . import experiments as exp
from . import metrics as met
from .certify import certify as run_certify
from .core import SeededRng, ValidationError, group_by_forecast, load_samples

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _metric_report(name, value, n, params=None, argmax_interval=None):
    return {
        "metric_name": name,
        "value": value,
        "n": n,
        "params": params or {},
        "argmax_interval": list(argmax_interval) if argmax_interval else None,
    }


def _read_samples(path, mode="empirical"):
    with open(path, "rb") as fh:
        return load_samples(fh, mode=mode)


def _emit(obj, out_path: Optional[str]):
    text = json.dumps(obj, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_audit(args) -> int:
    mode = "oracle" if args.oracle else "empirical"
    samples = _read_samples(args.input, mode=mode)
    data = group_by_forecast(samples)
    est = met.cutoff_error(data)
    reports = [
        _metric_report("cutoff", est.value, data.n,
                       {"delta": args.delta,
                        "radius": est.concentration_radius(args.delta)},
                       est.argmax_interval),
        _metric_report("binned_ece", met.binned_ece(data, args.bins), data.n,
                       {"bins": args.bins}),
        _metric_report("lipschitz_wce", met.lipschitz_wce(data).objective,
                       data.n),
    ]
    if args.oracle:
        odata = group_by_forecast(samples, residual_mode="oracle")
        oest = met.cutoff_error(odata)
        reports += [
            _metric_report("oracle_ece", met.oracle_ece(odata), odata.n),
            _metric_report("oracle_cutoff", oest.value, odata.n,
                           argmax_interval=oest.argmax_interval),
            _metric_report("oracle_lipschitz_wce",
                           met.lipschitz_wce(odata).objective, odata.n),
        ]
    _emit({"reports": reports}, args.out)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    samples = _read_samples(args.input)
    if args.method == "isotonic":
        cmap = cal.fit_isotonic(samples)
    elif args.method == "platt":
        cmap = cal.fit_platt(samples)
    else:
        cmap = cal.fit_modified_platt(samples, args.epsilon)
    result = {"calibrator": cmap.to_dict()}
    if args.test_input:
        test = _read_samples(args.test_input)
        t = np.array([s.forecast for s in test])
        y = np.array([s.outcome for s in test])
        from .core import grouped_from_arrays
        pre = met.cutoff_error(grouped_from_arrays(t, y)).value
        post = met.cutoff_error(
            grouped_from_arrays(cal.apply_map(cmap, t), y)).value
        result["evaluation"] = {"pre_cutoff": pre, "post_cutoff": post,
                                "n_test": len(test)}
    _emit(result, args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    samples = _read_samples(args.input)
    forecasts = [s.forecast for s in samples]
    outcomes = [s.outcome for s in samples]

    def pretrained(train_cov, train_y):
        # the file already carries model forecasts; the model is identity
        return lambda x: x

    seed = SeededRng(args.shuffle_seed) if args.shuffle_seed is not None else None
    verdict = run_certify(forecasts, outcomes, pretrained, args.c, args.delta,
                          split_seed=seed)
    _emit(verdict.to_dict(), args.out)
    return EXIT_OK


def cmd_decide(args) -> int:
    samples = _read_samples(args.input, mode="oracle")
    t = np.array([s.forecast for s in samples])
    mu = np.array([s.oracle_mean for s in samples])
    ev = dec.DecisionEvalSet(t, mu, args.tau)
    risk = dec.risk_bd(ev)
    bayes = dec.best_wrapper_risk(ev)
    mono = dec.best_monotone_wrapper_risk(ev)
    result = {"risk": risk, "bayes_risk": bayes, "monotone_risk": mono,
              "gap": risk - bayes, "monotone_gap": risk - mono}
    if args.ystar is not None:
        y = np.array([s.outcome for s in samples])
        result["sign_testing_risk"] = dec.risk_st(t, y, args.ystar)
    _emit(result, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = exp.SimulationConfig(runs=args.runs, n_train=args.n_train,
                                  n_eval=args.n_eval, tau=args.tau,
                                  master_seed=args.seed)
    records = exp.run_simulation(config)
    fields = exp.SimulationRunRecord.FIELDS
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            for rec in records:
                writer.writerow([getattr(rec, f) for f in fields])
    else:
        print(",".join(fields))
        for rec in records:
            print(",".join(str(getattr(rec, f)) for f in fields))
    return EXIT_OK


def cmd_counterexample(args) -> int:
    atoms, (a, b), wce = exp.platt_counterexample()
    _emit({
        "atoms": [{"forecast": t, "conditional_mean": q, "mass": m}
                  for t, q, m in atoms],
        "population_platt": {"a": a, "b": b},
        "certified_wce": wce,
        "implied_dce_lower_bound": wce / 2.0,
    }, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cutoffcal",
                                description="Calibration audit toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="compute calibration metrics on a CSV")
    a.add_argument("input")
    a.add_argument("--delta", type=float, default=0.05)
    a.add_argument("--bins", type=int, default=10)
    a.add_argument("--oracle", action="store_true")
    a.add_argument("--out")
    a.set_defaults(func=cmd_audit)

    c = sub.add_parser("calibrate", help="fit a post-hoc calibrator")
    c.add_argument("input")
    c.add_argument("--method", choices=["isotonic", "platt", "modified-platt"],
                   required=True)
    c.add_argument("--epsilon", type=float, default=None)
    c.add_argument("--test-input", help="held-out CSV for pre/post audit")
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    ce = sub.add_parser("certify", help="two-stage certification of forecasts")
    ce.add_argument("input")
    ce.add_argument("--c", type=float, required=True)
    ce.add_argument("--delta", type=float, default=0.05)
    ce.add_argument("--shuffle-seed", type=int, default=None)
    ce.add_argument("--out")
    ce.set_defaults(func=cmd_certify)

    d = sub.add_parser("decide", help="risk gaps on an oracle CSV")
    d.add_argument("input")
    d.add_argument("--tau", type=float, required=True)
    d.add_argument("--ystar", type=float, default=None)
    d.add_argument("--out")
    d.set_defaults(func=cmd_decide)

    s = sub.add_parser("simulate", help="misspecified-logistic simulation")
    s.add_argument("--runs", type=int, default=100)
    s.add_argument("--n-train", type=int, default=500)
    s.add_argument("--n-eval", type=int, default=10000)
    s.add_argument("--tau", type=float, default=0.35)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    x = sub.add_parser("counterexample-platt",
                       help="population logistic-rescaling counterexample")
    x.add_argument("--out")
    x.set_defaults(func=cmd_counterexample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # pragma: no cover
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
