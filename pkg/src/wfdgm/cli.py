"""Command line entry point: ``wfdgm-sim --preset comicon-small --protocol wfdgm,baseline --td 5,30,60``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, build_config, read_raw
from .runner import run_batch

EXIT_OK, EXIT_RUN_FAILURE, EXIT_CONFIG = 0, 1, 2


def _csv(conv):
    def parse(text: str):
        try:
            return [conv(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wfdgm-sim",
        description="Simulate WFD-GM and Baseline group formation and write metric CSVs.",
    )
    ap.add_argument("--config", type=Path, help="YAML/JSON scenario file")
    ap.add_argument("--preset", choices=sorted(PRESETS), help="named scenario preset")
    ap.add_argument("--protocol", type=_csv(str), help="wfdgm, baseline or a comma list")
    ap.add_argument("--td", type=_csv(float), help="decision period(s) in seconds, comma separated")
    ap.add_argument("--seed", type=_csv(int), help="seed(s), comma separated")
    ap.add_argument("--out", type=Path, help="output directory (one subdirectory per run)")
    ap.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    ap.add_argument("--trace", action="store_true", help="write trace.csv and check invariants")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        raw = read_raw(args.config) if args.config else {}
        if args.preset:
            raw["preset"] = args.preset
        if not raw:
            raise ConfigError("give --preset or --config")
        for key, value in (("protocol", args.protocol), ("t_d", args.td), ("seed", args.seed)):
            if value is not None:
                raw[key] = value
        if args.out is not None:
            raw["output"] = str(args.out)
        if args.trace:
            raw["trace"] = True
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = build_config(raw)
    except ConfigError as exc:
        print(f"wfdgm-sim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, outcomes = run_batch(cfg, jobs=args.jobs)
    done = sum(o.ok for o in outcomes)
    print(f"{done}/{len(outcomes)} run(s) completed under {cfg.output}")
    return EXIT_RUN_FAILURE if status else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
