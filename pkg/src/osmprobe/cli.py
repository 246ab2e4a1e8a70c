"""Command line: ``osmprobe {probe,sweep,solve,compare} --config cfg.json``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import experiments
from .experiments import ConfigError
from .linalg import OptimizationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _emit(text: str, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _public(d: dict) -> dict:
    return {k: v for k, v in d.items() if not k.startswith("_")}


def cmd_probe(args, cfg):
    res = experiments.probe(cfg, threads=args.threads)
    _emit(json.dumps(_public(res), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args, cfg):
    text, (point, rho) = experiments.sweep(cfg, threads=args.threads)
    _emit(text, args.out)
    print("grid minimum: " + " ".join(f"{v:.6g}" for v in point) + f" rho={rho:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_solve(args, cfg):
    report, hist, field, info = experiments.solve(cfg, threads=args.threads)
    _emit(hist, args.out)
    if args.field:
        _emit(field, args.field)
    summary = {k: v for k, v in _public(info).items() if k != "error_history" and k != "trace"}
    print(json.dumps(summary), file=sys.stderr)
    if not report.converged:
        print("error: iteration " + ("diverged" if report.diverged else "did not converge"), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_compare(args, cfg):
    text, rows = experiments.compare(cfg, threads=args.threads)
    _emit(text, args.out)
    if any(r["status"].startswith("failed") for r in rows):
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {"probe": cmd_probe, "sweep": cmd_sweep, "solve": cmd_solve, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osmprobe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("probe", "find transmission parameters by probing"),
                        ("sweep", "spectral radius on a parameter grid (CSV)"),
                        ("solve", "run the Schwarz iteration and dump convergence and solution"),
                        ("compare", "Fourier baseline vs probing variants (CSV)")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
        p.add_argument("--tol", type=float, help="override the iteration tolerance")
        p.add_argument("--max-it", type=int, help="override the iteration limit")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "solve":
            p.add_argument("--field", metavar="PATH", help="write the nodal solution as CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = experiments.load_config(args.config)
        if args.tol is not None:
            if args.tol <= 0:
                raise ConfigError("--tol must be positive")
            cfg.tol = args.tol
        if args.max_it is not None:
            if args.max_it < 1:
                raise ConfigError("--max-it must be positive")
            cfg.max_it = args.max_it
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, OptimizationError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
