"""
xdiff train: learn Theta on a corpus and write params, history and a stability report
"""
import argparse
import json

from ...config import Settings
from ...learning.autodiff import ParameterVector
from ...learning.trainer import init_lambda, train
from ...log import get_logger
from ...numerics.influence import init_ncdf
from ..common import add_override_flags, load_corpus, out_was_given, output_dir, run_config, write_lines
from ..params import ParamsFile, Provenance

logger = get_logger(__name__)


def add_parser(subparsers):
    parser = subparsers.add_parser("train", help="learn influence functions and lambda")
    add_override_flags(parser)
    parser.add_argument("--no-progress", action="store_true", help="disable the progress bar")
    parser.set_defaults(handler=execute)
    return parser


def execute(args: argparse.Namespace) -> int:
    settings = Settings.from_env()
    cfg = run_config(args)
    out = output_dir(cfg, settings, out_was_given(cfg))
    config_hash = cfg.config_hash()
    (out / "config.json").write_text(json.dumps(cfg.echo(), indent=2) + "\n")

    corpus = load_corpus(cfg)
    train_cfg = cfg.train_config(settings, progress=not args.no_progress)
    ncdf = init_ncdf(train_cfg.basis)
    lam0 = cfg.init_lambda if cfg.init_lambda is not None else init_lambda(corpus, train_cfg, ncdf)
    init = ParameterVector.from_influence(ncdf, lam0)

    def checkpoint(k: int, theta: ParameterVector):
        provenance = Provenance(seed=cfg.seed, config_hash=config_hash, iterations=k)
        ParamsFile.from_parameters(theta, train_cfg.basis, provenance).write(out / f"params_iter{k}.json")

    theta, history = train(corpus, train_cfg, init, cfg.lagrangian(), cfg.adam(), on_checkpoint=checkpoint)

    provenance = Provenance(seed=cfg.seed, config_hash=config_hash, iterations=len(history.rows))
    ParamsFile.from_parameters(theta, train_cfg.basis, provenance).write(out / "params.json")
    history.write_csv(out / "history.csv")
    lines = [f"stopping_time={history.stopping_time!r}", f"min_constraint={history.min_constraint!r}"]
    lines += history.semi_implicit.to_lines() + history.lambda_bound.to_lines()
    write_lines(out / "stability.txt", lines)
    logger.info(f"✅ Wrote params, history and stability report to {out}")

    if not history.feasible:
        logger.error("❌ Final parameters violate the stability constraints")
        return 3
    return 0
