"""
xdiff eval: compare learned parameters with the NCDF baseline on a test set

Every clean test image gets seeded Gaussian noise, is restored by both
filters, and is scored with PSNR against the clean image and with the
no-reference blur metric. The CSV holds one row per image plus a mean row.
"""
import argparse
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ...config import RunConfig, Settings
from ...errors import ConfigError
from ...imaging.imageio import GrayImage, load_dir
from ...imaging.metrics import EvalRow, blur, psnr
from ...learning.trainer import init_lambda
from ...log import get_logger
from ...numerics.field import Grid, ScalarField
from ...numerics.influence import InfluenceSet, init_ncdf
from ...numerics.scheme import SchemeConfig, initial_state, run
from ..common import add_override_flags, load_corpus, out_was_given, output_dir, run_config
from ..params import ParamsFile
from .denoise import require_stable

logger = get_logger(__name__)

# Noise stream key, disjoint from the training streams
_EVAL_STREAM = 3

COLUMNS = (
    "image_id", "stopping_time",
    "noisy_psnr_db", "noisy_blur",
    "trained_psnr_db", "trained_blur",
    "baseline_psnr_db", "baseline_blur",
)


@dataclass
class ImageResult:
    image_id: str
    noisy: EvalRow
    trained: EvalRow
    baseline: EvalRow


def add_parser(subparsers):
    parser = subparsers.add_parser("eval", help="PSNR/blur of learned vs NCDF filters on a test set")
    parser.add_argument("--params", type=Path, required=True, help="params JSON from xdiff train")
    parser.add_argument("--test-dir", type=Path, help="directory of clean test images (overrides test_dir)")
    parser.add_argument("--trajectory", action="store_true", help="also write per-step PSNR/blur curves")
    parser.add_argument("--force", action="store_true", help="evaluate even if the stability check fails")
    add_override_flags(parser)
    parser.set_defaults(handler=execute)
    return parser


def add_noise(image: GrayImage, sigma: float, seed: int, index: int) -> ScalarField:
    clean = image.to_field()
    rng = np.random.default_rng([seed, _EVAL_STREAM, index])
    return ScalarField(clean.grid, clean.values + sigma * rng.standard_normal(clean.grid.shape))


def _score(image_id: str, restored: ScalarField, clean: ScalarField) -> EvalRow:
    return EvalRow(image_id, psnr(restored, clean), blur(restored))


def _rollout(noisy: ScalarField, iset: InfluenceSet, cfg: RunConfig, lam: float, record: bool):
    grid = Grid(noisy.grid.n1, noisy.grid.n2, cfg.h1, cfg.h2)
    u0 = ScalarField(grid, noisy.values)
    scheme = SchemeConfig(cfg.dt, cfg.steps, grid, theta=cfg.theta, lam=lam)
    return run(initial_state(u0), iset, scheme, record=record)


def baseline_lambda(cfg: RunConfig, settings: Settings, ncdf: InfluenceSet,
                    test_images: Sequence[GrayImage]) -> float:
    """Configured init_lambda, else a grid search over the training corpus (or the test images)"""
    if cfg.init_lambda is not None:
        return cfg.init_lambda
    has_corpus = cfg.corpus_dir is not None or cfg.synth_count > 0
    corpus = load_corpus(cfg) if has_corpus else list(test_images)
    n1 = min(cfg.n1, *(img.height for img in corpus))
    n2 = min(cfg.n2, *(img.width for img in corpus))
    search = cfg.model_copy(update={"n1": n1, "n2": n2, "p": ncdf.basis.p, "a_min": ncdf.basis.a_min,
                                    "a_max": ncdf.basis.a_max, "nu": ncdf.basis.nu})
    return init_lambda(corpus, search.train_config(settings, progress=False), ncdf)


def evaluate(images: Sequence[Tuple[str, GrayImage]], params: ParamsFile, cfg: RunConfig, settings: Settings,
             trajectory: bool = False) -> Tuple[List[ImageResult], List[List]]:
    trained = params.influence()
    ncdf = init_ncdf(trained.basis)
    lam_base = baseline_lambda(cfg, settings, ncdf, [img for _, img in images])
    filters: Dict[str, Tuple[InfluenceSet, float]] = {"trained": (trained, params.lam), "baseline": (ncdf, lam_base)}

    results, curves = [], []
    for index, (image_id, image) in enumerate(images):
        clean = image.to_field()
        noisy = add_noise(image, cfg.sigma, cfg.seed, index)
        rows = {"noisy": _score(image_id, noisy, clean)}
        for name, (iset, lam) in filters.items():
            outcome = _rollout(noisy, iset, cfg, lam, record=trajectory)
            if trajectory:
                for m, state in enumerate(outcome.states):
                    curves.append([image_id, name, m, m * cfg.dt, psnr(state.u, clean), blur(state.u)])
                outcome = outcome.final
            rows[name] = _score(image_id, outcome.u, clean)
        results.append(ImageResult(image_id, rows["noisy"], rows["trained"], rows["baseline"]))
        logger.info(f"📊 {image_id}: noisy {rows['noisy'].psnr_db:.2f} dB, trained {rows['trained'].psnr_db:.2f} dB, "
                    f"baseline {rows['baseline'].psnr_db:.2f} dB")
    return results, curves


def _cell(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


def write_eval_csv(path: Path, results: Sequence[ImageResult], stopping_time: float):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(COLUMNS)
        for r in results:
            writer.writerow([r.image_id, _cell(stopping_time),
                             _cell(r.noisy.psnr_db), _cell(r.noisy.blur),
                             _cell(r.trained.psnr_db), _cell(r.trained.blur),
                             _cell(r.baseline.psnr_db), _cell(r.baseline.blur)])
        means = [float(np.mean([getattr(getattr(r, kind), metric) for r in results]))
                 for kind in ("noisy", "trained", "baseline") for metric in ("psnr_db", "blur")]
        writer.writerow(["mean", _cell(stopping_time)] + [_cell(v) for v in means])


def write_trajectory_csv(path: Path, curves: Sequence[Sequence]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("image_id", "filter", "step", "time", "psnr_db", "blur"))
        for image_id, name, m, t, p, b in curves:
            writer.writerow([image_id, name, m, _cell(t), _cell(p), _cell(b)])


def execute(args: argparse.Namespace) -> int:
    settings = Settings.from_env()
    cfg = run_config(args)
    test_dir = args.test_dir if args.test_dir is not None else cfg.test_dir
    if test_dir is None:
        raise ConfigError("eval needs --test-dir or test_dir in the config")
    images = load_dir(test_dir)
    if not images:
        raise ConfigError(f"no test images in {test_dir}")

    params = ParamsFile.read(args.params)
    require_stable(params.influence(), cfg.theta, args.force)
    logger.info(f"🔄 Evaluating {len(images)} images: sigma={cfg.sigma}, dt={cfg.dt}, M={cfg.steps}, "
                f"T={cfg.stopping_time:g}, theta={cfg.theta}")
    results, curves = evaluate(images, params, cfg, settings, trajectory=args.trajectory)

    out = output_dir(cfg, settings, out_was_given(cfg))
    write_eval_csv(out / "eval.csv", results, cfg.stopping_time)
    if args.trajectory:
        write_trajectory_csv(out / "eval_trajectory.csv", curves)
    logger.info(f"✅ Wrote evaluation to {out}")
    return 0
