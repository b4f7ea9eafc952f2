"""Command-line pipeline orchestration.

Subcommands: synth, preprocess, decompose, features, evaluate, metrics.
Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.
A plain-text config file (``key = value`` lines, '#' comments) may supply any
flag's value; flags given on the command line override the file.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import Optional, Sequence

from . import classify, evaluation, features as ft, signal_io, synth as sy
from .decompose import DecompParams, decompose, read_decomposed_csv, write_decomposed_csv
from .errors import DataError, SolverError
from .preprocess import FilterParams, preprocess

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool_flag(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {value!r}")


def _read_config(path, parser: argparse.ArgumentParser) -> dict:
    """Parse key = value lines; keys must match this subcommand's flags."""
    known = {}
    for action in parser._actions:
        if action.dest not in ("help",):
            known[action.dest] = action
    overrides = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}") from None
    for i, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"{path}:{i}: unknown config key {key!r}")
        action = known[dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            overrides[dest] = _bool_flag(value)
        elif action.type is not None:
            try:
                overrides[dest] = action.type(value)
            except ValueError:
                raise UsageError(f"{path}:{i}: bad value for {key}: {value!r}") from None
        else:
            overrides[dest] = value
        if action.choices and overrides[dest] not in action.choices:
            raise UsageError(f"{path}:{i}: {key} must be one of {sorted(action.choices)}")
    return overrides


def _parse_with_config(parser: _Parser, argv) -> argparse.Namespace:
    # find --config before full parsing so its values become defaults
    cfg_path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
        elif a.startswith("--config="):
            cfg_path = a.split("=", 1)[1]
    if cfg_path is not None:
        parser.set_defaults(**_read_config(cfg_path, parser))
    return parser.parse_args(argv)


def _add_common(parser: _Parser):
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--seed", type=int, default=0)


def _add_filter_flags(parser: _Parser):
    parser.add_argument("--fc", type=float, default=0.05, help="high-pass cutoff (Hz)")
    parser.add_argument("--ma-width", type=float, default=1.0, help="moving-average width (s)")
    parser.add_argument("--zero-phase", action="store_true")
    parser.add_argument("--skip-highpass", action="store_true")


def _add_decomp_flags(parser: _Parser):
    parser.add_argument("--tau0", type=float, default=2.0)
    parser.add_argument("--tau1", type=float, default=0.7)
    parser.add_argument("--alpha", type=float, default=8e-4)
    parser.add_argument("--gamma", type=float, default=1e-2)
    parser.add_argument("--knot-spacing", type=float, default=10.0)
    parser.add_argument("--qp-tol", type=float, default=1e-8)
    parser.add_argument("--qp-max-iter", type=int, default=50000)
    parser.add_argument("--backend", choices=("compiled", "python"), default=None)


def _filter_params(args) -> FilterParams:
    return FilterParams(fc_hz=args.fc, ma_width_s=args.ma_width,
                        zero_phase=args.zero_phase, skip_highpass=args.skip_highpass)


def _decomp_params(args) -> DecompParams:
    return DecompParams(tau0_s=args.tau0, tau1_s=args.tau1, alpha=args.alpha,
                        gamma=args.gamma, knot_spacing_s=args.knot_spacing,
                        qp_tol=args.qp_tol, qp_max_iter=args.qp_max_iter)


def _build_parsers():
    top = _Parser(prog="edaflow", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth",
                       help="emit a synthetic trace, labels, and ground truth")
    _add_common(p)
    p.add_argument("--duration", type=float, default=1200.0)
    p.add_argument("--fs", type=float, default=4.0)
    p.add_argument("--segment", type=float, default=120.0)
    p.add_argument("--rate-low", type=float, default=0.02)
    p.add_argument("--rate-high", type=float, default=0.15)
    p.add_argument("--noise-sigma", type=float, default=0.01)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("preprocess", help="filter a raw trace")
    _add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--fs", type=float, default=None, help="override inferred sampling rate")
    _add_filter_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompose",
                       help="split a trace into tonic/phasic components")
    _add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--fs", type=float, default=None)
    _add_decomp_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("features",
                       help="windowed features from a raw or decomposed trace")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="raw trace CSV; runs preprocess + decompose first")
    src.add_argument("--decomposed", help="decomposition CSV from the decompose step")
    p.add_argument("--labels", nargs="+", required=True,
                   help="one consensus label CSV, or two annotator CSVs")
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--stride", type=float, default=1.0)
    _add_filter_flags(p)
    _add_decomp_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate",
                       help="run the undersample-train-test protocol")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--algo", choices=classify.ALGO_KINDS + ("all",), default="all")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--split-mode", choices=("window", "block"), default="window")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.add_argument("--csv", default=None, help="also write the per-repeat CSV here")

    p = sub.add_parser("metrics",
                       help="accuracy/precision/recall from a confusion CSV")
    _add_common(p)
    p.add_argument("--confusion", required=True, help="CSV with tp,fp,fn,tn columns")

    return top


def _cmd_synth(args) -> int:
    params = sy.SynthParams(duration_s=args.duration, fs=args.fs, segment_s=args.segment,
                            scr_rate_low_hz=args.rate_low, scr_rate_high_hz=args.rate_high,
                            noise_sigma_us=args.noise_sigma, seed=args.seed)
    truth = sy.synth_trace(params)
    signal_io.write_trace_csv(f"{args.out_prefix}_trace.csv", truth.trace)
    signal_io.write_label_csv(f"{args.out_prefix}_labels.csv", truth.track)
    with open(f"{args.out_prefix}_truth.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "tonic_uS", "driver_uS", "noise_uS"])
        for row in zip(truth.trace.times(), truth.tonic_truth, truth.driver_truth, truth.noise):
            w.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    trace = signal_io.parse_trace(args.trace, fs_override=args.fs)
    out = preprocess(trace, _filter_params(args))
    signal_io.write_trace_csv(args.out, out)
    return EXIT_OK


def _cmd_decompose(args) -> int:
    trace = signal_io.parse_trace(args.trace, fs_override=args.fs)
    dec = decompose(trace, _decomp_params(args), backend=args.backend)
    write_decomposed_csv(args.out, dec, t0=trace.t0)
    return EXIT_OK


def _load_track(paths) -> signal_io.LabelTrack:
    if len(paths) == 1:
        return signal_io.parse_label_file(paths[0])
    if len(paths) == 2:
        return signal_io.parse_label_track(paths[0], paths[1])
    raise UsageError("--labels takes one or two files")


def _cmd_features(args) -> int:
    track = _load_track(args.labels)
    if args.decomposed:
        dec, t0 = read_decomposed_csv(args.decomposed)
    else:
        trace = signal_io.parse_trace(args.trace, fs_override=args.fs)
        clean = preprocess(trace, _filter_params(args))
        dec = decompose(clean, _decomp_params(args), backend=args.backend)
        t0 = trace.t0
    fm = ft.build_feature_matrix(dec, track,
                                 ft.WindowSpec(window_s=args.window, stride_s=args.stride),
                                 t0=t0)
    ft.write_feature_csv(args.out, fm)
    return EXIT_OK


def _effective_config_lines(args, skip=("command", "config", "out", "csv")) -> list:
    lines = []
    for key in sorted(vars(args)):
        if key in skip:
            continue
        lines.append(f"{key.replace('_', '-')} = {getattr(args, key)}")
    return lines


def _cmd_evaluate(args) -> int:
    data = ft.read_feature_csv(args.features)
    params = evaluation.ProtocolParams(train_fraction=args.train_fraction,
                                       repeats=args.repeats, seed=args.seed,
                                       split_mode=args.split_mode)
    algos = classify.ALGO_KINDS if args.algo == "all" else (args.algo,)
    header = _effective_config_lines(args)
    chunks = []
    summary = ["algo,accuracy_mean,accuracy_std,precision_mean,recall_mean"]
    for kind in algos:
        report = evaluation.run_protocol(data, classify.AlgoSpec(kind=kind, seed=args.seed),
                                         params)
        chunks.append(f"== {kind} ==\n"
                      + evaluation.render_report_text(report, header_lines=header))
        summary.append(f"{kind},{report.accuracy_mean:.6f},{report.accuracy_std:.6f},"
                       f"{report.precision_mean:.6f},{report.recall_mean:.6f}")
        if args.csv and len(algos) == 1:
            evaluation.write_report_csv(args.csv, report)
    text = "\n".join(chunks)
    if len(algos) > 1:
        text += "\n== summary ==\n" + "\n".join(summary) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    with open(args.confusion, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {"tp", "fp", "fn", "tn"} - set(reader.fieldnames):
            raise DataError(f"{args.confusion}: expected tp,fp,fn,tn columns")
        rows = list(reader)
    if not rows:
        raise DataError(f"{args.confusion}: no data rows")
    for row in rows:
        try:
            m = evaluation.ConfusionMatrix(tp=int(row["tp"]), fp=int(row["fp"]),
                                           fn=int(row["fn"]), tn=int(row["tn"]))
        except ValueError:
            raise DataError(f"{args.confusion}: non-integer counts in {row}") from None
        a, p, r = evaluation.metrics_from_confusion(m)
        fmt = lambda v: "undefined" if v is None else f"{100 * v:.1f}"
        print(f"accuracy={fmt(a)}% precision={fmt(p)}% recall={fmt(r)}%")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "decompose": _cmd_decompose,
    "features": _cmd_features,
    "evaluate": _cmd_evaluate,
    "metrics": _cmd_metrics,
}


def dispatch(argv: Sequence[str]) -> int:
    top = _build_parsers()
    try:
        if not argv or argv[0] not in _COMMANDS:
            raise UsageError(f"expected one of: {', '.join(_COMMANDS)}")
        sub = {a.dest: a for a in top._actions}["command"]
        parser = sub.choices[argv[0]]
        args = _parse_with_config(parser, list(argv[1:]))
        args.command = argv[0]
        return _COMMANDS[argv[0]](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main(argv: Optional[Sequence[str]] = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
