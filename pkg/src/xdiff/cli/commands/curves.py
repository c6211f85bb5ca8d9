"""
xdiff export-curves: CSV data for loss curves and influence-function plots
"""
import argparse
import csv
from pathlib import Path

from ...config import Settings
from ...errors import ConfigError
from ...learning.trainer import read_history_losses, smoothed_losses
from ...log import get_logger
from ...numerics.influence import init_ncdf
from ..params import ParamsFile

logger = get_logger(__name__)


def add_parser(subparsers):
    parser = subparsers.add_parser("export-curves", help="write loss and influence-function curves as CSV")
    parser.add_argument("--history", type=Path, help="history.csv from xdiff train")
    parser.add_argument("--params", type=Path, help="params JSON to sample against the NCDF initialization")
    parser.add_argument("--group", type=int, default=10, help="iterations averaged per loss point")
    parser.add_argument("--samples", type=int, default=401, help="sample points over the edge-detector range")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.set_defaults(handler=execute)
    return parser


def write_loss_curve(history: Path, path: Path, group: int):
    points = smoothed_losses(read_history_losses(history), group)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("iteration", "mean_loss"))
        for k, value in points:
            writer.writerow([k, repr(value)])


def write_influence_curves(params: ParamsFile, path: Path, samples: int):
    trained = params.influence()
    ncdf = init_ncdf(trained.basis)
    v = trained.basis.sample(samples)
    learned = trained.evaluate_all(v)
    initial = ncdf.evaluate_all(v)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["v"] + [f"trained_d{ell}" for ell in range(1, 5)] + [f"ncdf_d{ell}" for ell in range(1, 5)])
        for j, x in enumerate(v):
            writer.writerow([repr(float(x))] + [repr(float(val)) for val in learned[:, j]]
                            + [repr(float(val)) for val in initial[:, j]])


def execute(args: argparse.Namespace) -> int:
    if args.history is None and args.params is None:
        raise ConfigError("export-curves needs --history and/or --params")
    if args.samples < 2:
        raise ConfigError(f"--samples must be at least 2, got {args.samples}")
    out = args.out if args.out is not None else Path(Settings.from_env().output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.history is not None:
        if not args.history.is_file():
            raise ConfigError(f"history file not found: {args.history}")
        write_loss_curve(args.history, out / "loss_curve.csv", args.group)
    if args.params is not None:
        write_influence_curves(ParamsFile.read(args.params), out / "influence_curves.csv", args.samples)
    logger.info(f"✅ Wrote curves to {out}")
    return 0
