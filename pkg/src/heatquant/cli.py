"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, HeatquantError
from .experiment import MetricConfig, evaluate_predictions, load_config, parse_config, parse_normalization, run_sweep
from .metrics import FixedDistance
from .oracles import run_suite

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="heatquant", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an encode/predict/decode sweep from a JSON config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, help="report path (default: config output.path, else stdout)")
    run.add_argument("--format", choices=["csv", "json"])

    ev = sub.add_parser("evaluate", help="score prediction files against ground truth")
    ev.add_argument("--pred", required=True, type=Path)
    ev.add_argument("--gt", required=True, type=Path)
    ev.add_argument("--input-format", choices=["csv", "json"], help="landmark file format (default: by suffix)")
    ev.add_argument("--norm", choices=["fixed", "bbox", "inter_ocular", "inter_pupil"], default="fixed")
    ev.add_argument("--distance", type=float, default=100.0, help="distance for --norm fixed")
    ev.add_argument("--left", type=int, nargs="+", help="left eye landmark index (group for inter_pupil)")
    ev.add_argument("--right", type=int, nargs="+", help="right eye landmark index (group for inter_pupil)")
    ev.add_argument("--schema", type=Path, help='JSON with "inter_ocular": [l, r] and/or "inter_pupil": [[..], [..]]')
    ev.add_argument("--alpha", type=float, nargs="+", default=[0.05, 0.1])
    ev.add_argument("--pck-length", type=float)
    ev.add_argument("--per-image-mean", action="store_true", help="average per-image NME instead of pooling landmarks")
    ev.add_argument("--out", type=Path)
    ev.add_argument("--format", choices=["csv", "json"], default="json")

    ver = sub.add_parser("verify", help="run the oracle suite")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--quick", action="store_true", help="1e5 instead of 1e6 Monte Carlo samples")
    ver.add_argument("--out", type=Path, help="write verdicts as JSON")
    return p


def _emit(report, out: Path | None, fmt: str):
    if out is None:
        sys.stdout.write(report.to_json() if fmt == "json" else report.to_csv())
    else:
        report.write(out, fmt)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    raw = dict(cfg.raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.format is not None:
        raw["output"] = {**raw.get("output", {}), "format": args.format}
    if args.workers < 1:
        raise ConfigError("--workers", "must be >= 1")
    if raw != cfg.raw:
        cfg = parse_config(raw, args.config.parent)
    report = run_sweep(cfg, workers=args.workers)
    out = args.out or (Path(cfg.output_path) if cfg.output_path else None)
    if out is not None and not out.is_absolute() and args.out is None:
        out = args.config.parent / out
    _emit(report, out, cfg.output_format)
    for c in report.checks:
        if not c["passed"]:
            print(f"[FAIL] {c['name']}: observed={c['observed']!r}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY


def _normalization(args):
    if args.norm == "fixed":
        return FixedDistance(args.distance)
    if args.norm == "bbox":
        return "bbox"
    left, right = args.left, args.right
    if (left is None or right is None) and args.schema is not None:
        schema = json.loads(args.schema.read_text(encoding="utf-8"))
        if args.norm not in schema:
            raise ConfigError("--schema", f"no {args.norm} entry")
        left, right = schema[args.norm]
    if left is None or right is None:
        raise ConfigError("--left/--right", f"{args.norm} needs landmark indices or --schema")
    left, right = list(_as_list(left)), list(_as_list(right))
    if args.norm == "inter_ocular":
        if len(left) != 1 or len(right) != 1:
            raise ConfigError("--left/--right", "inter_ocular takes one index per side")
        return parse_normalization({"kind": "inter_ocular", "left": left[0], "right": right[0]})
    return parse_normalization({"kind": "inter_pupil", "left": left, "right": right})


def _as_list(v):
    return v if isinstance(v, (list, tuple)) else [v]


def _cmd_evaluate(args) -> int:
    metrics = MetricConfig(_normalization(args), tuple(args.alpha), args.pck_length, args.per_image_mean)
    report = evaluate_predictions(args.pred, args.gt, metrics, args.input_format)
    _emit(report, args.out, args.format)
    return EXIT_OK


def _cmd_verify(args) -> int:
    verdicts = run_suite(args.seed, quick=args.quick)
    for v in verdicts:
        print(v.line())
    if args.out is not None:
        args.out.write_text(json.dumps([v.to_dict() for v in verdicts], indent=1) + "\n", encoding="utf-8")
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_VERIFY


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "evaluate": _cmd_evaluate, "verify": _cmd_verify}[args.command]
    try:
        return handler(args)
    except (HeatquantError, OSError) as exc:
        print(f"heatquant {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
