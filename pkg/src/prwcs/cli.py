"""Command-line interface: ``prwcs <mode> [--config FILE] [overrides]``.

Exit codes: 0 success, 2 configuration error, 3 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import ConfigError, DomainError, __version__
from .config import MODES, SCAN_MODES, reference_document, parse_document, defaults_help
from .experiments import Result, execute
from .fitting import FitError, fit_cosine
from .reporting import emit
from .tables import ResultTable

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

DEFAULT_SCANS = {
    "scan-phi": {"start": 0.0, "stop": 360.0, "step": 22.5, "units": "deg", "method": "analytic"},
    "scan-rate": {"start": 100.0, "stop": 1500.0, "step": 100.0, "units": "khz", "method": "analytic"},
    "mean-field": {"start": 0.0, "stop": 720.0, "step": 5.0, "units": "deg"},
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config document")
    common.add_argument("--reference", action="store_true", help="start from the reference bunching-scan operating point (l=1, 4e5/s singles, 10 ns window, 5 s per point)")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--out", metavar="PATH", help="output file (stdout if omitted); scans also write .plot.dat and .png")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--phi-deg", type=float, metavar="F", help="mismatch angle in degrees")
    common.add_argument("--l", type=int, metavar="I", help="OAM charge: sets l1 = l2 = I, l3 = -I")
    common.add_argument("--mu-a", type=float, metavar="F")
    common.add_argument("--mu-b", type=float, metavar="F")
    common.add_argument("--single-rate", type=float, metavar="HZ", help="solve mu_a = mu_b for this D1 singles rate")
    common.add_argument("--window-ns", type=float, metavar="F", help="coincidence window in ns")
    common.add_argument("--duration-s", type=float, metavar="F", help="acquisition time per run in s")
    common.add_argument("--method", choices=("analytic", "simulate"), help="scan evaluation method")
    common.add_argument("--workers", type=int, metavar="N")
    common.add_argument("--no-plot", action="store_true", help="skip the PNG figure")

    parser = argparse.ArgumentParser(
        prog="prwcs",
        description="Phase-randomized weak coherent states in an OAM bunching interferometer.",
        epilog=defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"prwcs {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True, metavar="MODE")
    for mode in MODES:
        p = sub.add_parser(mode, parents=[common], epilog=defaults_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
        if mode == "fit":
            p.add_argument("--table", metavar="CSV", required=True, help="scan-phi CSV to fit")
            p.add_argument("--baseline", type=float, default=0.0, help="accidental baseline B (default 0)")
            p.add_argument("--baseline-err", type=float, default=0.0)
    return parser


def build_document(args) -> dict:
    """Config document from ``--config``/``--reference`` with command-line overrides applied."""
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}", ["--config"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {args.config}: {exc}", ["<root>"]) from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object", ["<root>"])
    elif args.reference:
        doc = reference_document(args.mode)
    else:
        doc = {}
    doc["mode"] = args.mode
    if args.mode in SCAN_MODES:
        doc.setdefault("scan", dict(DEFAULT_SCANS[args.mode]))
    else:
        doc.pop("scan", None)

    circuit = doc.setdefault("circuit", {})
    source = doc.setdefault("source", {})
    detector = doc.setdefault("detector", {})
    output = doc.setdefault("output", {})
    if args.phi_deg is not None:
        circuit["phi_deg"] = args.phi_deg
    if args.l is not None:
        circuit.update(l1=args.l, l2=args.l, l3=-args.l)
    if args.seed is not None:
        source["seed"] = args.seed
    if args.mu_a is not None or args.mu_b is not None:
        source.pop("single_rate", None)
    if args.mu_a is not None:
        source["mu_a"] = args.mu_a
    if args.mu_b is not None:
        source["mu_b"] = args.mu_b
    if args.single_rate is not None:
        source.pop("mu_a", None)
        source.pop("mu_b", None)
        source["single_rate"] = args.single_rate
    if args.duration_s is not None:
        source["duration"] = args.duration_s
    if args.window_ns is not None:
        detector["window"] = args.window_ns * 1e-9
    if args.method is not None and "scan" in doc and args.mode != "mean-field":
        doc["scan"]["method"] = args.method
    if args.format is not None:
        output["format"] = args.format
    if args.out is not None:
        output["path"] = args.out
    if args.no_plot:
        output["plot"] = False
    if args.workers is not None:
        doc["workers"] = args.workers
    return doc


def _fit_table(args, spec) -> Result:
    try:
        table = ResultTable.from_csv(Path(args.table).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read table {args.table}: {exc.strerror}", ["--table"]) from None
    for col in ("phi_deg", "absolute_cc"):
        if col not in table.columns:
            raise ConfigError(f"{args.table}: missing column {col}", ["--table"])
    l = abs(spec.circuit.l1) or 1
    fit = fit_cosine(table, l=l, baseline=args.baseline, baseline_err=args.baseline_err)
    d = fit.to_dict()
    d.pop("covariance")
    d["phase_offset_deg"] = math.degrees(fit.phase_offset)
    return Result(ResultTable(tuple(d), [tuple(d.values())]), fit, {"source_table": str(args.table)})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = parse_document(build_document(args))
        result = _fit_table(args, spec) if spec.mode == "fit" else execute(spec)
        for path in emit(result, spec):
            print(f"wrote {path}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, FitError, ArithmeticError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
