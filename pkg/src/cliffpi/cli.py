"""Command-line entry point: ``cliffpi <suite> [config.json] [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .suites import SUITES, SuiteConfig, UsageError, emit_report, render, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cliffpi", description="Run Pi-operator verification suites.")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("config", nargs="?", help="JSON config file")
    p.add_argument("--manifold", help="euclid | sphere | rp | cylinder | hopf | hyperbolic")
    p.add_argument("--n", type=int)
    p.add_argument("--bundle", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--resolution", type=int, action="append", help="repeat for a ladder")
    p.add_argument("--trunc", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> SuiteConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    if "manifold" in data and not isinstance(data["manifold"], dict):
        raise UsageError("manifold must be an object")
    manifold = dict(data.get("manifold") or {})
    if args.manifold:
        manifold = {"kind": args.manifold}
    for key, val in (("n", args.n), ("bundle", args.bundle), ("k", args.k), ("truncation", args.trunc)):
        if val is not None:
            manifold[key] = val
    if manifold:
        if "kind" not in manifold or "n" not in manifold:
            base = SuiteConfig.from_dict(args.suite).manifold
            manifold = {**base, **manifold} if "kind" not in manifold or manifold["kind"] == base["kind"] else {
                "n": 2, **manifold}
        data["manifold"] = manifold
    if args.resolution:
        data["resolutions"] = args.resolution
    if args.tol is not None:
        data["tolerances"] = {**data.get("tolerances", {}), "default": args.tol}
    for key in ("seed", "out", "format"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    return SuiteConfig.from_dict(args.suite, data)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        report = run_suite(args.suite, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if cfg.out:
            emit_report(report, cfg.out, cfg.format)
        else:
            sys.stdout.write(render(report, cfg.format))
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
