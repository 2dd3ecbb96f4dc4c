"""Command line front end.

    nli-cfm run link.yaml --out report.json --oracle

Exit codes: 0 success, 1 link validation failure, 2 numeric failure,
3 configuration, parse, or I/O failure (bad flags included).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .cfm_engine import CorrectionFactors
from .config_io import load_link, load_rho_factors, write_csv, write_json
from .errors import ConfigError, LinkValidationError, NumericError
from .pipeline import RunConfig, benchmark, run_pipeline
from .profile_fitter import FitSettings


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags, which collides with the
    # numeric-failure code; remap to the I/O-or-parse code 3
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nli-cfm",
                     description="Per-channel nonlinear-interference PSD of a "
                                 "Raman-tilted WDM link, via a fitted-profile "
                                 "closed form with an optional numeric reference.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="evaluate a link config")
    run.add_argument("input", help="YAML link config")
    run.add_argument("--out", help="write the report here instead of stdout")
    run.add_argument("--format", choices=["json", "csv"],
                     help="report format (default: by --out extension, else json)")
    run.add_argument("--oracle", action="store_true",
                     help="attach the numeric reference PSD per CUT")
    run.add_argument("--deep-oracle", action="store_true",
                     help="reference integrates the fitted profile in z as well")
    run.add_argument("--mc", type=float, default=2.0,
                     help="power weighting exponent of the profile fit (default 2)")
    run.add_argument("--sigma-range", metavar="LO,HI",
                     help="sigma search bracket in units of the intrinsic alpha")
    run.add_argument("--gs-tol", type=float, default=1e-4,
                     help="relative bracket tolerance of the sigma search")
    run.add_argument("--rho", default="identity",
                     help="correction factors: 'identity' or a YAML file "
                          "with rho_cut/rho_mch/rho_coh")
    run.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                     help="worker threads for fitting and per-CUT evaluation "
                          "(default: all cores); results do not depend on this")
    run.add_argument("--strict", action="store_true",
                     help="treat validation warnings as errors")
    run.add_argument("--bench", type=int, metavar="N",
                     help="benchmark with N repetitions (N >= 3) instead of reporting")
    run.add_argument("--stage", choices=["all", "cfm-only"], default="all",
                     help="what --bench times (default all)")
    run.add_argument("--freeze-profiles", action="store_true",
                     help="reuse the cached profiles even if the link changed")
    run.add_argument("--cache", metavar="PATH",
                     help="npz cache for span losses and fitted profiles")
    return parser


def _sigma_range(text: str) -> tuple[float, float]:
    try:
        lo_s, hi_s = text.split(",")
        lo, hi = float(lo_s), float(hi_s)
    except ValueError:
        raise ConfigError(f"--sigma-range expects LO,HI, got {text!r}") from None
    if not 0.0 < lo < hi:
        raise ConfigError(f"--sigma-range needs 0 < LO < HI, got {text!r}")
    return lo, hi


def _fit_settings(args) -> FitSettings:
    if args.mc < 0.0:
        raise ConfigError("--mc must be non-negative")
    if args.gs_tol <= 0.0:
        raise ConfigError("--gs-tol must be positive")
    lo, hi = (1.0, 4.0) if args.sigma_range is None else _sigma_range(args.sigma_range)
    return FitSettings(m_c=args.mc, sigma_lo=lo, sigma_hi=hi,
                       widen_lo=lo / 4.0, widen_hi=2.0 * hi, gs_tol=args.gs_tol)


def _run(args) -> int:
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    if args.bench is not None and args.bench < 3:
        raise ConfigError("--bench needs at least 3 repetitions")

    link = load_link(args.input)
    rho = CorrectionFactors.identity() if args.rho == "identity" \
        else load_rho_factors(args.rho)
    config = RunConfig(fit=_fit_settings(args), rho=rho, oracle=args.oracle,
                       deep_oracle=args.deep_oracle, threads=args.threads,
                       strict=args.strict, freeze_profiles=args.freeze_profiles,
                       cache_path=args.cache)

    if args.bench is not None:
        result = benchmark(link, config, repetitions=args.bench, stage=args.stage)
        json.dump(result, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0

    report = run_pipeline(link, config)
    fmt = args.format
    if fmt is None:
        fmt = "csv" if (args.out or "").endswith(".csv") else "json"
    writer = write_csv if fmt == "csv" else write_json
    writer(report, args.out if args.out else sys.stdout)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except LinkValidationError as exc:
        for diag in exc.diagnostics:
            print(diag, file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
