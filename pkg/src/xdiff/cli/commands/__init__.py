"""
Subcommand modules; each exposes add_parser(subparsers) and execute(args)
"""

from . import curves, denoise, evaluate, stability, train

COMMANDS = (train, denoise, evaluate, stability, curves)
