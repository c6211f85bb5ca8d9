#!/usr/bin/env python3
"""
XDiff command line
xdiff train | denoise | eval | check-stability | export-curves
"""
import argparse
import sys
from typing import List, Optional

from .. import __version__
from ..errors import ConfigError, StabilityRefusal, XDiffError
from ..log import get_logger
from .commands import COMMANDS

logger = get_logger(__name__)


class XDiffArgumentParser(argparse.ArgumentParser):
    """Usage errors become ConfigError (exit code 1) instead of SystemExit(2)"""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = XDiffArgumentParser(
        prog="xdiff",
        description="Learned cross-diffusion filters for image denoising",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=XDiffArgumentParser)
    for command in COMMANDS:
        command.add_parser(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        return args.handler(args)
    except StabilityRefusal as e:
        logger.error(f"❌ {e}")
        if e.report is not None:
            for line in e.report.to_lines():
                logger.error(f"   {line}")
        return e.exit_code
    except XDiffError as e:
        logger.error(f"❌ {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
