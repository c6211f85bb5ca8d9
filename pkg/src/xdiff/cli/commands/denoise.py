"""
xdiff denoise: run the learned filter on one image
"""
import argparse
from pathlib import Path

from ...config import RunConfig
from ...errors import StabilityRefusal
from ...imaging.imageio import GrayImage, load, save
from ...log import get_logger
from ...numerics.influence import InfluenceSet
from ...numerics.scheme import SchemeConfig, initial_state, run
from ...numerics.stability import check_semi_implicit
from ..common import add_override_flags, run_config
from ..params import ParamsFile

logger = get_logger(__name__)


def add_parser(subparsers):
    parser = subparsers.add_parser("denoise", help="denoise an image with learned parameters")
    parser.add_argument("input", type=Path, help="noisy PGM/PNG image")
    parser.add_argument("output", type=Path, help="restored image (.pgm or .png)")
    parser.add_argument("--params", type=Path, required=True, help="params JSON from xdiff train")
    parser.add_argument("--force", action="store_true", help="run even if the stability check fails")
    add_override_flags(parser, include_out=False)
    parser.set_defaults(handler=execute)
    return parser


def require_stable(iset: InfluenceSet, theta: int, force: bool):
    """Refuse semi-implicit runs with parameters that fail the positivity check"""
    if theta != 1:
        return
    report = check_semi_implicit(iset)
    if report.satisfied:
        return
    if force:
        logger.warning(f"⚠️ Stability check failed (margin {report.margin:.3e}); continuing because of --force")
        return
    raise StabilityRefusal(
        f"parameters fail the semi-implicit stability check (margin {report.margin:.3e} "
        f"at v={report.worst_point:.4g}); use --force to run anyway",
        report=report,
    )


def denoise_image(image: GrayImage, params: ParamsFile, cfg: RunConfig) -> GrayImage:
    u0 = image.to_field(cfg.h1, cfg.h2)
    scheme = SchemeConfig(cfg.dt, cfg.steps, u0.grid, theta=cfg.theta, lam=params.lam)
    final = run(initial_state(u0), params.influence(), scheme)
    return GrayImage.from_field(final.u)


def execute(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    params = ParamsFile.read(args.params)
    require_stable(params.influence(), cfg.theta, args.force)

    image = load(args.input)
    logger.info(f"🔄 Denoising {args.input} ({image.width}x{image.height}): "
                f"dt={cfg.dt}, M={cfg.steps}, T={cfg.stopping_time:g}, theta={cfg.theta}")
    restored = denoise_image(image, params, cfg)
    save(restored, args.output)
    logger.info(f"✅ Saved {args.output}")
    return 0
