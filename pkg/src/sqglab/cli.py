"""Command-line entry point: ``sqglab <subcommand> [--config F] [--out D] [--seed N] [--threads N]``.

Each subcommand writes CSV artifacts, an echo of the effective configuration
and ``summary.txt`` into the output directory.  The exit status is 1 when any
check fails, 2 on configuration or runtime errors, 0 otherwise.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config, write_effective
from .studies import COMMANDS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sqglab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS), help="study to run")
    ap.add_argument("--config", type=Path, help="key = value configuration file (defaults if omitted)")
    ap.add_argument("--out", type=Path, help="output directory (overrides 'out' in the config)")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    ap.add_argument("--threads", type=int, help="worker threads, 0 = auto (overrides the config)")
    ap.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    over = {}
    if args.out is not None:
        over["out"] = str(args.out)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be in [0, 2^64)")
        over["seed"] = args.seed
    if args.threads is not None:
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        over["threads"] = args.threads
    if args.no_figures:
        over["figures"] = False
    return replace(cfg, **over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as e:
        print(f"sqglab: config error: {e}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_effective(cfg, out)
    try:
        summary = COMMANDS[args.command](cfg, out)
    except (ValueError, RuntimeError) as e:
        print(f"sqglab {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    text = summary.text()
    (out / "summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0 if summary.ok else 1


if __name__ == "__main__":
    sys.exit(main())
