"""Command-line experiment runner.

Subcommands: generate | train | eval | export | verify.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (ExperimentConfigError, load_config, resolve_config,
                          run_eval, run_export, run_generate, run_train,
                          run_verify)
from .nets import ConfigError
from .problems import CertificateError, DomainError
from .training import NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _common_flags(sub):
    sub.add_argument("--config", type=Path, help="experiment config JSON")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the seed list with a single seed")
    sub.add_argument("--scale", choices=("desk", "full"), default=None,
                     help="override the budget preset")
    sub.add_argument("--overwrite", action="store_true",
                     help="allow clobbering existing outputs")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker cap for trajectory generation")
    sub.add_argument("--out", type=Path, default=Path("runs/latest"),
                     help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfinn",
        description="structure-preserving dynamics learning benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("generate", "sample ground-truth trajectory data"),
        ("train", "fit the configured model on the generated data"),
        ("eval", "score trained checkpoints and write the report"),
        ("export", "write figure-ready files from a report"),
        ("verify", "run structural invariants and kernel certificates"),
    ):
        p = sub.add_parser(name, help=text)
        _common_flags(p)
        if name == "export":
            p.add_argument("--report", type=Path, default=None,
                           help="report JSON (default: search --out)")
    return parser


def _load(args) -> "ExperimentConfig":
    if args.config is None:
        raise ExperimentConfigError("--config is required for this command")
    with open(args.config) as fh:
        doc = json.load(fh)
    if args.seed is not None:
        doc["seeds"] = [args.seed]
    if args.scale is not None:
        doc["scale"] = args.scale
    cfg = resolve_config(doc)
    cfg.require_valid()
    return cfg


def _cmd_generate(args) -> int:
    cfg = _load(args)
    target = run_generate(cfg, args.out, overwrite=args.overwrite,
                          threads=max(1, args.threads))
    print(f"wrote {target}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load(args)
    for path in run_train(cfg, args.out):
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _load(args)
    path = run_eval(cfg, args.out)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_export(args) -> int:
    report = args.report
    if report is None:
        hits = sorted(Path(args.out).glob("report_*.json"))
        if not hits:
            raise FileNotFoundError(f"no report_*.json under {args.out}")
        report = hits[0]
    for path in run_export(report, Path(args.out) / "export"):
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = run_verify()
    failed = False
    for name in sorted(results):
        ok, value = results[name]
        print(f"{'PASS' if ok else 'FAIL'}  {name}  (worst {value:.3e})")
        failed |= not ok
    if failed:
        raise NumericalError("structural verification failed")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "generate": _cmd_generate,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "export": _cmd_export,
        "verify": _cmd_verify,
    }[args.command]
    try:
        return handler(args)
    except (ExperimentConfigError, ConfigError, DomainError,
            json.JSONDecodeError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, CertificateError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
