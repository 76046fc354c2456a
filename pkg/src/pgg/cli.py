"""Command line entry point: ``pgg <kind> --config FILE [--out DIR]``.

Exit status is 0 when every flag passes, 2 on a threshold failure and 1 on
any error.
"""

import argparse
import logging
import sys

from .config import KINDS, parse_config
from .errors import PggError
from .experiments import run_experiment
from .report import write_report

log = logging.getLogger("pgg")


def build_parser():
    ap = argparse.ArgumentParser(prog="pgg", description="Optional public goods game experiments")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", required=True, help="flat key = value configuration file")
    ap.add_argument("--out", default=None, help="directory for CSV output (default: print summary only)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config, kind=args.kind)
        log.info("running %s from %s", cfg.kind, args.config)
        report = run_experiment(cfg)
        if args.out:
            for path in write_report(report, args.out):
                log.info("wrote %s", path)
    except (PggError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.summary_line())
    return 0 if report.passed else 2


if __name__ == "__main__":
    sys.exit(main())
