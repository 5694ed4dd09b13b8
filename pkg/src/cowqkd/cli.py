"""Command line entry point: ``cowqkd {sweep,trace,keylen,compare}``."""
from __future__ import annotations

import argparse
import json
import sys

from .harness import (ANCHOR_ATTENUATIONS, ConfigError, compare_reference, emit_trace, parse_config,
                      rows_to_csv, rows_to_json, run_sweep)
from .params import SecurityParams
from .security import evaluate_key_rate

DEFAULT_SWEEP = (1.5, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value parameter file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one parameter (repeatable); wins over --config")
    p.add_argument("--seed", type=int, help="64-bit seed for Monte Carlo streams")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _load(args) -> "RunConfig":  # noqa: F821
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return parse_config(args.config, overrides)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cowqkd", description="Coherent-one-way QKD simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="key rate, QBER and visibility versus channel loss")
    _add_common(p)
    p.add_argument("--mode", choices=("analytic", "mc"), default="analytic")
    p.add_argument("--atten", type=_float_list, default=list(DEFAULT_SWEEP), help="comma-separated dB values")
    p.add_argument("--counts", type=float, help="Monte Carlo sifted-count target per point")

    p = sub.add_parser("trace", help="folded arrival-time histograms of all three outputs")
    _add_common(p)
    p.add_argument("--atten", type=float, default=15.0)
    p.add_argument("--duration", type=float, default=60.0, help="acquisition time in seconds")

    p = sub.add_parser("keylen", help="evaluate the finite-key length directly")
    _add_common(p)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--qber", type=float, required=True)
    p.add_argument("--visibility", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--duration", type=float, default=1.0)

    p = sub.add_parser("compare", help="check a sweep against the published operating points")
    _add_common(p)
    p.add_argument("--mode", choices=("analytic", "mc"), default="analytic")
    p.add_argument("--counts", type=float)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"cowqkd: {exc}", file=sys.stderr)
        return 2

    if args.command == "sweep":
        rows = run_sweep(cfg, args.atten, args.mode, counts=args.counts)
        text = rows_to_csv(rows, cfg.header()) if args.format == "csv" else rows_to_json(rows, cfg)
        _emit(text, args.out)
    elif args.command == "trace":
        trace = emit_trace(cfg, args.atten, args.duration)
        if args.format == "csv":
            text = trace.to_csv()
        else:
            text = json.dumps({"spd1": trace.spd1.tolist(), "destructive": trace.destructive.tolist(),
                               "constructive": trace.constructive.tolist(),
                               "resolution_ps": trace.resolution_ps, "duration_s": trace.duration_s})
        _emit(text, args.out)
        print(f"constructive overlap/side peak ratio: {trace.peak_ratio():.3f}", file=sys.stderr)
    elif args.command == "keylen":
        sec: SecurityParams = cfg.system.security
        res = evaluate_key_rate(args.n, args.qber, args.visibility, args.mu, args.duration, sec)
        doc = res.to_dict()
        if args.format == "csv":
            keys = ("zeta", "key_length_bits", "rate_bits_per_s", "extractable", "n", "qber", "visibility", "mu")
            text = ",".join(keys) + "\n" + ",".join(repr(doc[k]) for k in keys) + "\n"
        else:
            text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        _emit(text, args.out)
    elif args.command == "compare":
        rows = run_sweep(cfg, ANCHOR_ATTENUATIONS, args.mode, counts=args.counts)
        report = compare_reference(rows)
        _emit(report.format() + "\n", args.out)
        return 0 if report.passed else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
