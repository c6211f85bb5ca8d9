"""
Helpers shared by the subcommands: config overrides, corpus loading, outputs
"""
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..config import RunConfig, Settings
from ..errors import ConfigError
from ..imaging.imageio import GrayImage, load_dir, synth_corpus

# flag -> RunConfig key
OVERRIDE_FLAGS = {
    "dt": "dt",
    "steps": "steps",
    "theta": "theta",
    "sigma": "sigma",
    "seed": "seed",
    "out": "out",
    "preset": "preset",
}


def add_override_flags(parser: argparse.ArgumentParser, include_out: bool = True):
    """Flags that override values of the JSON run config; include_out=False for
    subcommands that name their output positionally"""
    parser.add_argument("--config", type=Path, help="JSON run config")
    parser.add_argument("--dt", type=float, help="time step (diffusion time units)")
    parser.add_argument("--steps", type=int, help="number of time steps M")
    parser.add_argument("--theta", type=int, choices=(0, 1),
                        help="0 = explicit, 1 = semi-implicit")
    parser.add_argument("--sigma", type=float, help="noise standard deviation (0-255 scale)")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--preset", help="named (sigma, dt, M) preset, e.g. sigma10_dt0.05_m10")
    if include_out:
        parser.add_argument("--out", help="output directory")
    parser.add_argument("--deterministic", action="store_true", help="serial, bit-reproducible execution")


def run_config(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {key: getattr(args, flag, None) for flag, key in OVERRIDE_FLAGS.items()}
    if getattr(args, "deterministic", False):
        overrides["deterministic"] = True
    config_path = getattr(args, "config", None)
    if config_path is not None:
        return RunConfig.load(config_path, overrides)
    return RunConfig.from_dict({}, overrides)


def output_dir(cfg: RunConfig, settings: Settings, explicit: bool) -> Path:
    """Explicit --out/config value wins, then XDIFF_OUTPUT_DIR"""
    path = Path(cfg.out if explicit else settings.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def out_was_given(cfg: RunConfig) -> bool:
    return "out" in cfg.model_fields_set


def load_corpus(cfg: RunConfig) -> List[GrayImage]:
    """Training images from corpus_dir, or a synthetic corpus"""
    if cfg.corpus_dir is not None:
        images = [img for _, img in load_dir(cfg.corpus_dir)]
        if not images:
            raise ConfigError(f"no images in corpus_dir {cfg.corpus_dir}")
        return images
    if cfg.synth_count:
        return synth_corpus(cfg.synth_count, (cfg.synth_width, cfg.synth_height), cfg.seed)
    raise ConfigError("config needs corpus_dir or synth_count to build a training corpus")


def write_lines(path: Path, lines: Sequence[str]):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def format_float(value: float) -> str:
    return repr(float(value))
