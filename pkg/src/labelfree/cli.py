"""Command-line interface: ``labelfree estimate | predict | simulate``.

Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 estimator
degeneracy. Errors are written to stderr as one JSON object per line unless
``--human-errors`` is given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .accuracies import DEFAULT_EPS, clip_accuracies, psi_eta_from_b
from .data import parse_prediction_csv, validate
from .ensemble import (em_predict, em_refine, majority_vote, ml_predict, sml_predict,
                       unsupervised_accuracies)
from .errors import EstimatorDegeneracy, LabelFreeError, ParseError
from .imbalance import DEFAULT_DELTA, DEFAULT_GRID_STEP, estimate_b_likelihood, estimate_b_tensor
from .moments import sample_covariance
from .simulation import (SyntheticSpec, run_ensemble_comparison, run_imbalance_experiment,
                         run_mae_vs_m_experiment)
from .spectral import estimate_v

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_DEGENERATE = 0, 1, 2, 3

SCENARIOS = ("imbalance", "ensemble", "mae-vs-m")

SCENARIO_DEFAULTS = {
    "imbalance": {"m": 10, "b_values": [0.0, 0.3, 0.6],
                  "n_values": [1250, 2500, 5000, 10000, 20000, 40000],
                  "trials": 30, "acc_range": [0.5, 0.8]},
    "ensemble": {"n": 10000, "b": 0.0, "trials": 30,
                 "psi": [0.9, 0.9] + [0.55] * 8, "eta": [0.9, 0.9] + [0.55] * 8},
    "mae-vs-m": {"m_values": [5, 10, 15, 20, 30], "b": 0.3, "n": 10000, "trials": 50,
                 "pi_range": [0.69, 0.71]},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _probability_arg(name):
    def parse(text):
        value = float(text)
        if not 0 < value < 0.5:
            raise argparse.ArgumentTypeError(f"{name} must lie in (0, 0.5), got {value}")
        return value
    return parse


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", "-i", help="prediction CSV (default: stdin)")
    common.add_argument("--encoding", choices=("pm_one", "zero_one"), default="pm_one")
    common.add_argument("--transpose", action="store_true",
                        help="input rows are instances, columns are classifiers")
    common.add_argument("--delta", type=_probability_arg("delta"), default=DEFAULT_DELTA)
    common.add_argument("--eps", type=_probability_arg("eps"), default=DEFAULT_EPS)
    common.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", "-o", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--human-errors", action="store_true",
                        help="print errors as plain text instead of JSON")

    parser = _Parser(prog="labelfree", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", parents=[common],
                         help="estimate class imbalance and per-classifier accuracies")
    est.add_argument("--method", choices=("tensor", "likelihood", "both"), default="both")

    pred = sub.add_parser("predict", parents=[common], help="unsupervised ensemble labels")
    pred.add_argument("--ensemble", choices=("mv", "sml", "isml", "isml-em"), default="isml")
    pred.add_argument("--method", choices=("tensor", "likelihood"), default="likelihood",
                      help="class-imbalance estimator feeding isml")
    pred.add_argument("--em-max-iter", type=int, default=500)
    pred.add_argument("--em-tol", type=float, default=1e-8)

    sim = sub.add_parser("simulate", parents=[common], help="synthetic experiments")
    sim.add_argument("--scenario", required=True,
                     help=f"one of {', '.join(SCENARIOS)} or a JSON scenario file")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--m", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--b", type=float)
    sim.add_argument("--b-values", type=_float_list)
    sim.add_argument("--n-values", type=_int_list)
    sim.add_argument("--m-values", type=_int_list)
    sim.add_argument("--estimator", choices=("tensor", "likelihood"), default="likelihood",
                     help="class-imbalance estimator feeding isml (ensemble scenario)")
    return parser


# -- output helpers ----------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _report_error(err: dict, human: bool) -> None:
    if human:
        print(f"error: {err['error']}: {err['message']}", file=sys.stderr)
    else:
        print(json.dumps(err, sort_keys=True), file=sys.stderr)


def _read_matrix(args):
    if args.input:
        try:
            text = Path(args.input).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read {args.input}: {exc.strerror}") from None
    else:
        text = sys.stdin.read()
    return parse_prediction_csv(text, args.encoding, transpose=args.transpose)


def _round(x):
    return [float(v) for v in np.asarray(x, dtype=float)]


def _method_report(est, eps) -> dict:
    sv = est.spectral
    acc = clip_accuracies(psi_eta_from_b(est.mu, sv.v, est.b), eps)
    classifiers = [
        {"index": i, "psi": float(acc.psi[i]), "eta": float(acc.eta[i]), "pi": float(acc.pi[i]),
         "clipped": bool(acc.clipped[i]), "raw_psi": float(acc.raw_psi[i]),
         "raw_eta": float(acc.raw_eta[i])}
        for i in range(acc.m)
    ]
    report = {"method": est.method, "b": est.b, "delta": est.delta, "classifiers": classifiers,
              "v": _round(sv.v), "residual": sv.residual, "iterations": sv.iterations,
              "converged": sv.converged}
    if est.alpha is not None:
        report["alpha"] = est.alpha
    return report


def _estimate_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "b", "delta", "classifier", "psi", "eta", "pi", "clipped", "v", "residual"])
    for rep in reports:
        for c, v in zip(rep["classifiers"], rep["v"]):
            w.writerow([rep["method"], repr(rep["b"]), repr(rep["delta"]), c["index"],
                        repr(c["psi"]), repr(c["eta"]), repr(c["pi"]), int(c["clipped"]),
                        repr(v), repr(rep["residual"])])
    return buf.getvalue()


# -- subcommands -------------------------------------------------------------

def cmd_estimate(args) -> int:
    Z = _read_matrix(args)
    methods = ("tensor", "likelihood") if args.method == "both" else (args.method,)
    reports, errors = [], []
    for method in methods:
        try:
            if method == "tensor":
                est = estimate_b_tensor(Z, args.delta)
            else:
                est = estimate_b_likelihood(Z, args.delta, args.grid_step, args.eps)
        except EstimatorDegeneracy as err:
            errors.append({**err.as_dict(), "method": method})
            continue
        reports.append(_method_report(est, args.eps))
    doc = {"m": Z.m, "n": Z.n, "results": reports,
           "warnings": [{"code": c, "message": msg} for c, msg in validate(Z).warnings],
           "errors": errors}
    if args.format == "json":
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(_estimate_csv(reports), args.out)
    for err in errors:
        _report_error(err, args.human_errors)
    return EXIT_DEGENERATE if errors else EXIT_OK


def cmd_predict(args) -> int:
    Z = _read_matrix(args)
    if args.ensemble == "mv":
        pred = majority_vote(Z)
    elif args.ensemble == "sml":
        pred = sml_predict(Z, estimate_v(sample_covariance(Z)).v)
    else:
        acc = unsupervised_accuracies(Z, args.method, args.delta, args.eps, args.grid_step)
        if args.ensemble == "isml":
            pred = ml_predict(Z, acc)
        else:
            pred = em_predict(em_refine(Z, acc, args.em_max_iter, args.em_tol, args.eps))
    if args.format == "json":
        doc = {"ensemble": args.ensemble, "labels": [int(x) for x in pred.labels],
               "scores": _round(pred.scores)}
        _emit(json.dumps(doc, sort_keys=True) + "\n", args.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "label", "score"])
        for j, (lab, sc) in enumerate(zip(pred.labels, pred.scores)):
            w.writerow([j, int(lab), repr(float(sc))])
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def load_scenario(name_or_path: str) -> tuple:
    """Resolve a scenario name or JSON file to ``(scenario, settings)``."""
    if name_or_path in SCENARIOS:
        return name_or_path, dict(SCENARIO_DEFAULTS[name_or_path])
    path = Path(name_or_path)
    if not path.is_file():
        raise UsageError(f"unknown scenario {name_or_path!r}; expected one of {SCENARIOS} or a file")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read scenario file {path}: {exc}") from None
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise UsageError(f"scenario file must set 'scenario' to one of {SCENARIOS}")
    settings = dict(SCENARIO_DEFAULTS[scenario])
    settings.update({k: v for k, v in data.items() if k != "scenario"})
    return scenario, settings


def _apply_overrides(settings: dict, args) -> dict:
    for key in ("trials", "m", "n", "b", "b_values", "n_values", "m_values"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    return settings


def run_scenario(scenario: str, settings: dict, args):
    threads = max(1, args.threads)
    if scenario == "imbalance":
        m = int(settings["m"])
        base = SyntheticSpec(n=1, b=0.0, psi=np.full(m, 0.7), eta=np.full(m, 0.7), seed=args.seed)
        return run_imbalance_experiment(settings["b_values"], settings["n_values"],
                                        int(settings["trials"]), base,
                                        acc_range=tuple(settings["acc_range"]),
                                        delta=args.delta, grid_step=args.grid_step,
                                        eps=args.eps, threads=threads), "n"
    if scenario == "ensemble":
        psi, eta = settings["psi"], settings["eta"]
        spec = SyntheticSpec(n=int(settings["n"]), b=float(settings["b"]), psi=psi, eta=eta,
                             seed=args.seed)
        return run_ensemble_comparison(spec, int(settings["trials"]), method=args.estimator,
                                       delta=args.delta, grid_step=args.grid_step,
                                       eps=args.eps, threads=threads), "method"
    base = SyntheticSpec(n=int(settings["n"]), b=float(settings["b"]), psi=[0.7] * 3,
                         eta=[0.7] * 3, seed=args.seed)
    return run_mae_vs_m_experiment(settings["m_values"], int(settings["trials"]), base,
                                   pi_range=tuple(settings["pi_range"]), delta=args.delta,
                                   threads=threads), "m"


def _summary_text(result) -> str:
    lines = [f"scenario: {result.name}"]
    for row in result.rows:
        cfg = " ".join(f"{k}={v}" for k, v in row["config"].items())
        lines.append(f"{cfg} {row['metric']}: mean={row['mean']:.6g} std={row['std']:.6g} "
                     f"trials={row['trials']} failures={row['failures']}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    scenario, settings = load_scenario(args.scenario)
    settings = _apply_overrides(settings, args)
    result, x_key = run_scenario(scenario, settings, args)
    table = result.to_csv()
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / f"{scenario}.csv").write_text(table, encoding="utf-8")
        (outdir / f"{scenario}.plot.dat").write_text(result.to_plot_data(x_key), encoding="utf-8")
        summary = {"scenario": scenario, "seed": args.seed, "settings": settings,
                   "rows": result.rows}
        (outdir / f"{scenario}.summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        sys.stdout.write(_summary_text(result))
    else:
        sys.stdout.write(table if args.format == "csv" else _summary_text(result))
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "predict": cmd_predict, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    human = "--human-errors" in (sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return COMMANDS[args.command](args)
    except UsageError as exc:
        _report_error({"error": "UsageError", "message": str(exc)}, human)
        return EXIT_USAGE
    except ParseError as exc:
        _report_error(exc.as_dict(), human)
        return EXIT_PARSE
    except EstimatorDegeneracy as exc:
        _report_error(exc.as_dict(), human)
        return EXIT_DEGENERATE
    except LabelFreeError as exc:
        _report_error(exc.as_dict(), human)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
