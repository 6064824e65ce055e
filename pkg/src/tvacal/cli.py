"""Command-line front end: ``tvacal {synth,split,fit,apply,eval,diagram}``.

Exit status 0 on success, 2 on usage errors, 1 on data or fitting errors.
Diagnostics go to stderr; data goes to the named files or to stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings

from . import _json
from .adapters import BINARY_METHODS, SCALING_METHODS, VALID_MODES, Calibrator, fit, valid_pairs_text
from .binary import DEFAULT_HB_BINS
from .dataset import format_float, load_dataset, save_dataset, split
from .errors import CalibrationError
from .metrics import DEFAULT_BINS, reliability_diagram, summary_metrics
from .scaling import FitOptions
from .synthetic import SynthSpec, generate

FORMATS = ("csv", "binary")


def _add_format(p, name="--format", help="dataset format; inferred from the suffix (.csv) when omitted"):
    p.add_argument(name, choices=FORMATS, default=None, help=help)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="tvacal", description="Post-hoc confidence calibration from exported logits.",
        formatter_class=fmt, allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic logits dataset", formatter_class=fmt,
                       allow_abbrev=False)
    p.add_argument("--classes", type=int, default=100, help="number of classes L")
    p.add_argument("--samples", type=int, default=10000, help="number of samples N")
    p.add_argument("--scale", type=float, default=2.0, help="std of the latent Gaussian logits")
    p.add_argument("--tau", type=float, default=1.0, help="distortion temperature applied to the logits")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out", required=True, help="output dataset path")
    _add_format(p)

    p = sub.add_parser("split", help="split a dataset into calibration and test parts",
                       formatter_class=fmt, allow_abbrev=False)
    p.add_argument("--input", required=True, help="input dataset path")
    _add_format(p, "--input-format", "format of --input; inferred from the suffix when omitted")
    p.add_argument("--fraction", type=float, default=0.5, help="calibration fraction in (0, 1)")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--cal-out", required=True, help="calibration part output path")
    p.add_argument("--test-out", required=True, help="test part output path")
    _add_format(p)

    p = sub.add_parser("fit", help="fit a calibrator and write it as JSON", formatter_class=fmt,
                       allow_abbrev=False)
    p.add_argument("--input", required=True, help="calibration dataset path")
    _add_format(p, "--input-format", "format of --input; inferred from the suffix when omitted")
    p.add_argument("--method", required=True, choices=SCALING_METHODS + BINARY_METHODS)
    p.add_argument("--mode", required=True, choices=("standard", "ova", "tva"),
                   help="valid pairs: " + valid_pairs_text())
    p.add_argument("--out", required=True, help="calibrator JSON output path")
    p.add_argument("--bins", type=int, default=DEFAULT_HB_BINS, help="histogram binning bin count")
    p.add_argument("--scheme", choices=("auto", "equal_size", "equal_mass"), default="auto",
                   help="histogram binning scheme (auto: lower calibration-set ECE)")
    p.add_argument("--lam", type=float, default=0.01, help="VS/DC regularization strength")
    p.add_argument("--lr", type=float, default=0.01, help="gradient descent learning rate")
    p.add_argument("--max-iter", type=int, default=2000, help="gradient descent iteration cap")
    p.add_argument("--tol", type=float, default=1e-9, help="stop when the loss decreases by less")
    p.add_argument("--init", choices=("default", "ts"), default="default",
                   help="VS/DC initialization (ts: coefficients 1/T from a temperature fit)")
    p.add_argument("--no-normalize", action="store_true", help="OvA: do not renormalize rows")

    p = sub.add_parser("apply", help="write per-sample calibrated confidences as CSV",
                       formatter_class=fmt, allow_abbrev=False)
    p.add_argument("--input", required=True, help="dataset path")
    _add_format(p, "--input-format", "format of --input; inferred from the suffix when omitted")
    p.add_argument("--calibrator", required=True, help="calibrator JSON path")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")

    p = sub.add_parser("eval", help="metrics before and after calibration as JSON",
                       formatter_class=fmt, allow_abbrev=False)
    p.add_argument("--input", required=True, help="dataset path")
    _add_format(p, "--input-format", "format of --input; inferred from the suffix when omitted")
    p.add_argument("--calibrator", default=None, help="calibrator JSON path (omit for raw metrics only)")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="ECE bin count")
    p.add_argument("--out", default="-", help="output JSON path, '-' for stdout")

    p = sub.add_parser("diagram", help="reliability diagram table as CSV", formatter_class=fmt,
                       allow_abbrev=False)
    p.add_argument("--input", required=True, help="dataset path")
    _add_format(p, "--input-format", "format of --input; inferred from the suffix when omitted")
    p.add_argument("--calibrator", default=None, help="calibrator JSON path (omit for raw confidences)")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="bin count")
    p.add_argument("--scheme", choices=("equal_width", "equal_mass"), default="equal_width")
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    return parser


def _write_text(path, text):
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _summaries(args):
    data = load_dataset(args.input, args.input_format)
    raw = data.summary()
    if args.calibrator is None:
        return data, raw, None
    cal = Calibrator.load(args.calibrator)
    _, summary = cal.apply(data)
    return data, raw, summary


def cmd_synth(args):
    spec = SynthSpec(args.classes, args.samples, args.scale, args.tau, args.seed)
    save_dataset(generate(spec), args.out, args.format)


def cmd_split(args):
    data = load_dataset(args.input, args.input_format)
    cal, test = split(data, args.fraction, args.seed)
    save_dataset(cal, args.cal_out, args.format)
    save_dataset(test, args.test_out, args.format)


def cmd_fit(args):
    data = load_dataset(args.input, args.input_format)
    kwargs = {}
    options = None
    if args.method in SCALING_METHODS:
        options = FitOptions(lam=args.lam, learning_rate=args.lr, max_iter=args.max_iter, tol=args.tol)
        if args.mode != "ova":
            kwargs["init"] = args.init
    else:
        kwargs["bins"] = args.bins
        kwargs["scheme"] = args.scheme
        if args.mode == "ova":
            kwargs["normalize"] = not args.no_normalize
    calibrator = fit(args.method, args.mode, data, options, **kwargs)
    calibrator.save(args.out)


def cmd_apply(args):
    data = load_dataset(args.input, args.input_format)
    calibrator = Calibrator.load(args.calibrator)
    raw = data.summary()
    _, summary = calibrator.apply(data)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "predicted", "raw_confidence", "calibrated_confidence", "correct"])
    for i in range(data.n_samples):
        w.writerow([i, int(summary.predicted[i]), format_float(raw.confidence[i]),
                    format_float(summary.confidence[i]), int(summary.correctness[i])])
    _write_text(args.out, buf.getvalue())


def cmd_eval(args):
    _, raw, summary = _summaries(args)
    report = {"uncalibrated": summary_metrics(raw.confidence, raw.correctness, args.bins).to_dict()}
    if summary is not None:
        report["calibrated"] = summary_metrics(summary.confidence, summary.correctness, args.bins).to_dict()
    _write_text(args.out, _json.dumps(report) + "\n")


def cmd_diagram(args):
    _, raw, summary = _summaries(args)
    s = raw if summary is None else summary
    diagram = reliability_diagram(s.confidence, s.correctness, args.bins, args.scheme)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lower", "bin_upper", "count", "accuracy", "mean_confidence"])
    for b in diagram.bins:
        w.writerow([format_float(b.lower), format_float(b.upper), b.count,
                    format_float(b.accuracy), format_float(b.mean_confidence)])
    _write_text(args.out, buf.getvalue())


COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "fit": cmd_fit,
    "apply": cmd_apply,
    "eval": cmd_eval,
    "diagram": cmd_diagram,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "fit" and args.mode not in VALID_MODES[args.method]:
        parser.error(f"--method {args.method} does not support --mode {args.mode}; "
                     f"valid pairs: {valid_pairs_text()}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _warn_to_stderr
            COMMANDS[args.command](args)
    except (CalibrationError, OSError) as exc:
        print(f"tvacal {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def _warn_to_stderr(message, category, filename, lineno, file=None, line=None):
    print(f"tvacal: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
