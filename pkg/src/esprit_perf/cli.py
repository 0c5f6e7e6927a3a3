"""Command-line entry point: parameter sweeps and single-source closed forms."""

from __future__ import annotations

import argparse
import sys

from .errors import EspritError
from .harness import emit_csv, load_config, run_sweep
from .mse_analysis import (
    crb_single_source,
    efficiency,
    ls_mse_single_source,
    sls_mse_single_source,
)


def _sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.mode is not None:
        changes["mode"] = args.mode
    if changes:
        cfg = cfg.replace(**changes)
    records = run_sweep(cfg)
    emit_csv(records, args.output, x_column=cfg.x_column, timing=not args.no_timing)
    return 0


def _closed_form(args: argparse.Namespace) -> int:
    snr = 10.0 ** (args.snr_db / 10.0)
    if args.two_d is not None:
        dims = tuple(args.two_d)
        if args.sls:
            raise EspritError("the SLS closed form is one-dimensional; drop --two-d")
    else:
        if args.m is None:
            raise EspritError("give --m or --two-d")
        dims = (args.m,)
    if any(m < 2 for m in dims):
        raise EspritError("every array dimension needs at least 2 sensors")
    crb = crb_single_source(dims, snr)
    ls = ls_mse_single_source(dims, snr)
    print(f"array {' x '.join(map(str, dims))}, effective SNR {args.snr_db:g} dB")
    for r, (c, m) in enumerate(zip(crb, ls), start=1):
        print(f"  dim {r}: mse_ls={m:.10g} crb={c:.10g} eta_ls={c / m:.10g}")
    print(f"  total: mse_ls={ls.sum():.10g} crb={crb.sum():.10g} eta_ls={float(efficiency(crb.sum(), ls.sum())):.10g}")
    if args.sls:
        sls = sls_mse_single_source(dims[0], snr)
        print(f"  sls: mse_sls={sls:.10g} eta_sls={float(efficiency(crb[0], sls)):.10g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esprit-perf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a Monte-Carlo sweep from a YAML file and write CSV")
    sweep.add_argument("config", help="sweep file (YAML)")
    sweep.add_argument("-o", "--output", required=True, help="CSV destination")
    sweep.add_argument("--trials", type=int, help="override the number of trials")
    sweep.add_argument("--seed", type=int, help="override the master seed")
    sweep.add_argument("--mode", choices=("snr", "geometry"), help="override the sweep mode")
    sweep.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    sweep.add_argument("--no-timing", action="store_true", help="write wall_s as 0 for byte-stable output")
    sweep.set_defaults(func=_sweep)

    closed = sub.add_parser("closed-form", help="single-source MSE, CRB and efficiency")
    closed.add_argument("--m", type=int, help="sensors of a uniform linear array")
    closed.add_argument("--sls", action="store_true", help="also print the single-step SLS value")
    closed.add_argument("--two-d", nargs=2, type=int, metavar=("M1", "M2"), help="uniform rectangular array")
    closed.add_argument("--snr-db", type=float, default=0.0, help="effective SNR in dB (default 0)")
    closed.set_defaults(func=_closed_form)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EspritError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
