"""Command-line front end: ``binomial-di {construct,simulate,bounds,verify}``.

Settings come from built-in defaults, then ``--config``, then individual
flags, with later sources winning.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from .exceptions import BinomialDIError, CodebookFormatError
from .experiments import (ConfigError, ExperimentConfig, run_bounds, run_construct, run_simulate,
                          run_verify)

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--trials", type=int, metavar="N")
    common.add_argument("--n", type=int, metavar="N", help="blocklength")
    common.add_argument("--b", type=float, metavar="FLOAT", help="exponent constant b")
    common.add_argument("--threads", type=int, metavar="N")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="binomial-di", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("construct", parents=[common], help="build and save a packing codebook")
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo type I / II error table")
    sim.add_argument("--codebook", metavar="PATH")
    sim.add_argument("--pairs", type=int, metavar="K", help="number of type II pairs")
    bnd = sub.add_parser("bounds", parents=[common], help="rate bounds over an n-grid")
    bnd.add_argument("--grid", type=int, nargs="*", metavar="N", help="blocklengths")
    ver = sub.add_parser("verify", parents=[common], help="property suite")
    ver.add_argument("--codebook", metavar="PATH")
    return parser


def _resolve(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    data = cfg.to_dict()
    for flag in ("seed", "out", "trials", "threads"):
        if getattr(args, flag) is not None:
            data[flag] = getattr(args, flag)
    if args.n is not None:
        data["packing"]["n"] = args.n
    if args.b is not None:
        data["packing"]["b"] = args.b
    if args.command in ("simulate", "verify") and args.codebook is not None:
        data[args.command]["codebook"] = args.codebook
    if args.command == "simulate" and args.pairs is not None:
        data["simulate"]["type2_pairs"] = args.pairs
    if args.command == "bounds" and args.grid is not None:
        data["n_grid"] = args.grid
    return ExperimentConfig.from_dict(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "construct":
            summary = run_construct(cfg)
        elif args.command == "simulate":
            summary = run_simulate(cfg)
        elif args.command == "bounds":
            summary = run_bounds(cfg)
        else:
            summary = run_verify(cfg)
            for row in summary["rows"]:
                tag = "PASS" if row["passed"] else ("INFO" if row["informational"] else "FAIL")
                print(f"{tag} {row['property']}: {row['detail']}")
            if summary["failed"]:
                return EXIT_VERIFY
            return EXIT_OK
    except (ConfigError, CodebookFormatError) as exc:
        if args.command == "verify" and isinstance(exc, CodebookFormatError):
            print(f"FAIL codebook invariant {exc.invariant}: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BinomialDIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(summary, default=str, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
