"""Command-line front end.

Every command is a pure function of its input bytes, flags, and seed:
identical invocations produce byte-identical output.  The first output
line echoes the fully resolved command so any result can be re-run
exactly.  Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric
guard.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from contextlib import nullcontext

import numpy as np

from . import simlab
from .data import load_csv, split_by_treatment
from .errors import DataError, GuardError, UsageError
from .inference import EstimatorConfig, bootstrap_report, regression_report
from .screening import screen_features


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(stream, echo: str, header, rows, as_json: bool) -> None:
    if as_json:
        stream.write(json.dumps({"config": echo}, sort_keys=True) + "\n")
        for row in rows:
            stream.write(json.dumps(row, sort_keys=True) + "\n")
    else:
        stream.write(f"# {echo}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[key]) for key in header])


def _out_stream(args):
    if args.output:
        return open(args.output, "w", newline="", encoding="utf-8")
    return nullcontext(sys.stdout)


def _parse_point(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse query point {text!r}") from None


def _parse_sweep(text: str):
    try:
        coord_part, range_part = text.split("=")
        pieces = range_part.split(":")
        lo, hi = float(pieces[0]), float(pieces[1])
        step = float(pieces[2]) if len(pieces) > 2 else 1.0
        coord = int(coord_part)
    except (ValueError, IndexError):
        raise UsageError(
            f"cannot parse sweep {text!r}; expected COORD=LO:HI[:STEP]"
        ) from None
    if step <= 0:
        raise UsageError(f"sweep step must be positive, got {step}")
    if coord < 1:
        raise UsageError(f"sweep coordinate is 1-based, got {coord}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    if count < 1:
        raise UsageError(f"empty sweep range {text!r}")
    return coord - 1, [lo + i * step for i in range(count)]


def _parse_grid(text: str) -> list[int]:
    try:
        pieces = [int(p) for p in text.split(":")]
        lo, hi = pieces[0], pieces[1]
        step = pieces[2] if len(pieces) > 2 else 1
    except (ValueError, IndexError):
        raise UsageError(f"cannot parse grid {text!r}; expected LO:HI[:STEP]") from None
    if step < 1 or hi < lo:
        raise UsageError(f"bad grid range {text!r}")
    return list(range(lo, hi + 1, step))


def _config_from(args) -> EstimatorConfig:
    return EstimatorConfig(weight_dim=args.weight_dim, s=args.s, s_max=args.s_max)


def _flag(name: str, value) -> str:
    return "" if value is None else f" --{name} {value}"


def _common_echo(args) -> str:
    echo = _flag("s", args.s) + _flag("weight-dim", args.weight_dim)
    echo += _flag("s-max", args.s_max)
    echo += f" --boot-reps {args.boot_reps} --level {args.level}"
    echo += f" --interval {args.interval} --seed {args.seed}"
    if args.json:
        echo += " --json"
    return echo


def _report_row(at: list[float], report) -> dict:
    return {
        "at": ";".join(repr(v) for v in at),
        "point": report.point,
        "variance": report.variance,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
        "s_treated": report.s_treated,
        "s_control": report.s_control,
        "tuned": int(report.tune_treated is not None),
        "level": report.level,
        "boot_reps": report.boot_reps,
        "seed": report.seed,
    }


_REPORT_HEADER = ("at", "point", "variance", "ci_low", "ci_high", "s_treated",
                  "s_control", "tuned", "level", "boot_reps", "seed")


def cmd_estimate(args) -> int:
    data = load_csv(args.input)
    if data.treatment is not None:
        raise UsageError(
            "input has a treatment column; use the 'hte' command instead"
        )
    config = _config_from(args)
    echo = f"distnn estimate --input {args.input}"
    echo += "".join(f" --at {a}" for a in args.at)
    echo += _common_echo(args)
    rows = []
    for text in args.at:
        point = _parse_point(text)
        report = regression_report(
            data, point, boot_reps=args.boot_reps, level=args.level,
            seed=args.seed, config=config, interval=args.interval,
        )
        rows.append(_report_row(point, report))
    with _out_stream(args) as stream:
        _emit(stream, echo, _REPORT_HEADER, rows, args.json)
    return 0


def cmd_hte(args) -> int:
    data = load_csv(args.input)
    if data.treatment is None:
        raise UsageError("hte requires a 'w' column in the input CSV")
    view = split_by_treatment(data)
    config = _config_from(args)
    echo = f"distnn hte --input {args.input}"
    echo += "".join(f" --at {a}" for a in args.at)
    if args.sweep:
        echo += f" --sweep {args.sweep}"
    echo += _common_echo(args)
    if args.sweep:
        if len(args.at) != 1:
            raise UsageError("--sweep needs exactly one --at base point")
        coord, values = _parse_sweep(args.sweep)
        base = _parse_point(args.at[0])
        if coord >= len(base):
            raise UsageError(
                f"sweep coordinate {coord + 1} exceeds point dimension {len(base)}"
            )
        points = []
        for v in values:
            point = list(base)
            point[coord] = v
            points.append(point)
    else:
        points = [_parse_point(text) for text in args.at]
    rows = []
    for point in points:
        report = bootstrap_report(
            view, point, boot_reps=args.boot_reps, level=args.level,
            seed=args.seed, config=config, interval=args.interval,
        )
        rows.append(_report_row(point, report))
    with _out_stream(args) as stream:
        _emit(stream, echo, _REPORT_HEADER, rows, args.json)
    return 0


def cmd_simulate(args) -> int:
    spec = simlab.make_spec(args.setting, n=args.n)
    echo = (f"distnn simulate --setting {args.setting} --reps {args.reps}"
            f" --n {args.n} --family {args.family}")
    echo += _flag("s", args.s) + _flag("k", args.k)
    echo += _flag("weight-dim", args.weight_dim) + _flag("s-max", args.s_max)
    echo += f" --boot-reps {args.boot_reps} --seed {args.seed}"
    echo += _flag("long", args.long) + _flag("external", args.external)
    if args.json:
        echo += " --json"
    metrics, long_rows = simlab.run_monte_carlo_rows(
        spec, args.family, reps=args.reps, seed=args.seed,
        boot_reps=args.boot_reps, s=args.s, k=args.k,
        weight_dim=args.weight_dim, s_max=args.s_max,
    )
    entries = [(str(args.setting), args.family, simlab.metrics_as_mapping(metrics))]
    if args.external:
        entries.extend(simlab.aggregate_rows(simlab.read_long_csv(args.external)))
    if args.long:
        with open(args.long, "w", newline="", encoding="utf-8") as fh:
            simlab.write_long_csv(long_rows, fh, header_comment=echo)
    with _out_stream(args) as stream:
        if args.json:
            rows = [dict(zip(simlab.METRICS_HEADER,
                             (setting, estimator,
                              *(m.get(key) for key in simlab.METRICS_HEADER[2:]))))
                    for setting, estimator, m in entries]
            _emit(stream, echo, simlab.METRICS_HEADER, rows, True)
        else:
            simlab.write_metrics_csv(entries, stream, header_comment=echo)
    return 0


def cmd_tradeoff(args) -> int:
    spec = simlab.make_spec(args.setting, n=args.n)
    grid = _parse_grid(args.grid)
    echo = (f"distnn tradeoff --setting {args.setting} --estimator {args.estimator}"
            f" --grid {args.grid} --reps {args.reps} --n {args.n}")
    echo += _flag("weight-dim", args.weight_dim)
    echo += f" --seed {args.seed}"
    if args.json:
        echo += " --json"
    curve = simlab.tradeoff_scan(
        spec, args.estimator, grid, reps=args.reps, seed=args.seed,
        weight_dim=args.weight_dim,
    )
    with _out_stream(args) as stream:
        if args.json:
            rows = [{"s_or_k": int(g), "bias": float(b), "mse": float(m)}
                    for g, b, m in zip(curve.grid, curve.bias, curve.mse)]
            _emit(stream, echo, simlab.CURVE_HEADER, rows, True)
        else:
            simlab.write_curve_csv(curve, stream, header_comment=echo)
    return 0


def cmd_screen(args) -> int:
    data = load_csv(args.input)
    echo = f"distnn screen --input {args.input}"
    echo += _flag("top", args.top) + _flag("threshold", args.threshold)
    echo += f" --seed {args.seed}"
    if args.json:
        echo += " --json"
    result = screen_features(data, top_k=args.top, threshold=args.threshold)
    kept = set(result.kept)
    rows = [{"feature": f"x{j + 1}", "dcor": float(result.dcor[j]),
             "kept": int(j in kept)} for j in range(data.d)]
    with _out_stream(args) as stream:
        _emit(stream, echo, ("feature", "dcor", "kept"), rows, args.json)
    return 0


def _add_common(parser) -> None:
    parser.add_argument("--seed", type=int, default=0,
                        help="seed controlling all randomness (default 0)")
    parser.add_argument("--output", default=None, help="write output to a file")
    parser.add_argument("--json", action="store_true",
                        help="emit JSON-lines instead of CSV")


def _add_estimation_flags(parser) -> None:
    parser.add_argument("--s", type=int, default=None,
                        help="fix the subsampling scale (skips tuning)")
    parser.add_argument("--weight-dim", type=int, default=None,
                        help="override the exponent dimension of the combining weights")
    parser.add_argument("--s-max", type=int, default=None,
                        help="cap for the tuning scan")
    parser.add_argument("--boot-reps", type=int, default=1000,
                        help="bootstrap replicates (default 1000)")
    parser.add_argument("--level", type=float, default=0.95,
                        help="confidence level (default 0.95)")
    parser.add_argument("--interval", choices=("percentile", "normal"),
                        default="percentile", help="interval construction")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distnn",
        description="Two-scale distributional nearest neighbor estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="regression estimate at query points")
    p.add_argument("--input", required=True, help="CSV with x1..xd and y columns")
    p.add_argument("--at", action="append", required=True,
                   help="query point as comma-separated coordinates (repeatable)")
    _add_estimation_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("hte", help="treatment-effect estimates at query points")
    p.add_argument("--input", required=True, help="CSV with x1..xd, w, and y columns")
    p.add_argument("--at", action="append", required=True,
                   help="query point as comma-separated coordinates (repeatable)")
    p.add_argument("--sweep", default=None,
                   help="sweep one coordinate: COORD=LO:HI[:STEP] (1-based)")
    _add_estimation_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_hte)

    p = sub.add_parser("simulate", help="Monte Carlo metrics for a benchmark setting")
    p.add_argument("--setting", type=int, required=True, help="setting number 1..11")
    p.add_argument("--reps", type=int, required=True, help="Monte Carlo replications")
    p.add_argument("--n", type=int, default=1000, help="sample size per replication")
    p.add_argument("--family", choices=simlab.FAMILIES, default="two-scale-dnn")
    p.add_argument("--s", type=int, default=None, help="fixed subsampling scale")
    p.add_argument("--k", type=int, default=None, help="neighborhood size for knn families")
    p.add_argument("--weight-dim", type=int, default=None)
    p.add_argument("--s-max", type=int, default=None, help="cap for the tuning scan")
    p.add_argument("--boot-reps", type=int, default=200)
    p.add_argument("--long", default=None, help="also write per-replication rows here")
    p.add_argument("--external", default=None,
                   help="long-format CSV of external estimates to aggregate alongside")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tradeoff", help="bias/MSE curve over a grid of scales")
    p.add_argument("--setting", type=int, required=True)
    p.add_argument("--estimator", choices=simlab.FAMILIES, required=True)
    p.add_argument("--grid", required=True, help="grid as LO:HI[:STEP]")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--weight-dim", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("screen", help="distance-correlation feature screening")
    p.add_argument("--input", required=True)
    p.add_argument("--top", type=int, default=None, help="keep the top K features")
    p.add_argument("--threshold", type=float, default=None,
                   help="keep features with dcor >= threshold")
    _add_common(p)
    p.set_defaults(func=cmd_screen)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"distnn: error: usage: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"distnn: error: data: {exc}", file=sys.stderr)
        return 3
    except GuardError as exc:
        print(f"distnn: error: guard: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"distnn: error: data: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
