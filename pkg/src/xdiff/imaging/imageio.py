"""
Grayscale image IO and the synthetic training corpus

PGM P5 (8-bit) is read and written through Pillow; PNG goes through pypng.
Pixels are real-valued everywhere in the pipeline and only quantized on save.
"""
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from ..errors import ConfigError, ImageFormatError
from ..log import get_logger
from ..numerics.field import Grid, ScalarField

try:
    import png
    HAS_PYPNG = True
except ImportError:
    png = None
    HAS_PYPNG = False

logger = get_logger(__name__)

PathLike = Union[str, Path]
IMAGE_SUFFIXES = (".pgm", ".png")


@dataclass
class GrayImage:
    """Single-channel image, pixels stored as a (height, width) float array"""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ImageFormatError(f"image dimensions must be positive, got {self.width}x{self.height}")
        pixels = np.asarray(self.pixels, dtype=float)
        if pixels.size != self.width * self.height:
            raise ImageFormatError(f"{pixels.size} pixels for a {self.width}x{self.height} image")
        pixels = pixels.reshape(self.height, self.width)
        if not np.all(np.isfinite(pixels)):
            raise ImageFormatError("image contains non-finite pixels")
        self.pixels = pixels

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "GrayImage":
        pixels = np.asarray(pixels, dtype=float)
        if pixels.ndim != 2:
            raise ImageFormatError(f"expected a 2-D pixel array, got shape {pixels.shape}")
        return cls(pixels.shape[1], pixels.shape[0], pixels)

    @classmethod
    def from_field(cls, field: ScalarField) -> "GrayImage":
        return cls.from_array(field.values)

    def to_field(self, h1: float = 1.0, h2: float = 1.0) -> ScalarField:
        """Rows map to axis 1, columns to axis 2"""
        return ScalarField(Grid(self.height, self.width, h1, h2), self.pixels)

    def crop(self, top: int, left: int, n1: int, n2: int) -> "GrayImage":
        if top < 0 or left < 0 or top + n1 > self.height or left + n2 > self.width:
            raise ConfigError(f"crop {n1}x{n2} at ({top}, {left}) exceeds a {self.height}x{self.width} image")
        return GrayImage.from_array(self.pixels[top:top + n1, left:left + n2])

    def quantized(self) -> np.ndarray:
        """Pixels clamped to [0, 255] and rounded to uint8"""
        return np.clip(np.rint(self.pixels), 0, 255).astype(np.uint8)


# PGM

def _load_pgm(path: Path) -> GrayImage:
    try:
        with Image.open(path) as im:
            if im.format != "PPM":
                raise ImageFormatError(f"{path} is not a PGM file (found {im.format})")
            if im.mode in ("RGB", "RGBA"):
                raise ImageFormatError(f"{path} is a colour PPM; only grayscale is supported")
            if im.mode != "L":
                raise ImageFormatError(f"{path} has mode {im.mode}; only 8-bit grayscale PGM is supported")
            if im.tile and im.tile[0][0] == "ppm_plain":
                raise ImageFormatError(f"{path} is a plain (ASCII) PGM; only binary P5 is supported")
            pixels = np.asarray(im, dtype=float)
    except ImageFormatError:
        raise
    except (OSError, ValueError, SyntaxError) as e:
        raise ImageFormatError(f"cannot decode PGM {path}: {e}") from e
    return GrayImage.from_array(pixels)


def _save_pgm(img: GrayImage, path: Path):
    Image.fromarray(img.quantized()).save(path, format="PPM")


# PNG

def _require_pypng():
    if not HAS_PYPNG:
        raise ImageFormatError("PNG support needs pypng: pip install pypng")


def _load_png(path: Path) -> GrayImage:
    _require_pypng()
    try:
        width, height, rows, info = png.Reader(filename=str(path)).asDirect()
        pixels = np.vstack([np.asarray(row, dtype=float) for row in rows])
    except (png.Error, EOFError, ValueError, zlib.error) as e:
        raise ImageFormatError(f"cannot decode PNG {path}: {e}") from e
    if not info.get("greyscale", False):
        raise ImageFormatError(f"{path} is a colour PNG; only grayscale is supported")
    if info.get("alpha", False):
        raise ImageFormatError(f"{path} has an alpha channel; only plain grayscale is supported")
    if info.get("bitdepth") != 8:
        raise ImageFormatError(f"{path} has bit depth {info.get('bitdepth')}; only 8-bit is supported")
    return GrayImage(width, height, pixels)


def _save_png(img: GrayImage, path: Path):
    _require_pypng()
    writer = png.Writer(img.width, img.height, greyscale=True, bitdepth=8)
    with open(path, "wb") as f:
        writer.write(f, img.quantized().tolist())


def load(path: PathLike) -> GrayImage:
    """Read an 8-bit grayscale PGM (P5) or PNG"""
    path = Path(path)
    if not path.is_file():
        raise ImageFormatError(f"image not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return _load_pgm(path)
    if suffix == ".png":
        return _load_png(path)
    raise ImageFormatError(f"unsupported image format {suffix or '(none)'} for {path}")


def save(img: GrayImage, path: PathLike):
    """Clamp to [0, 255], round, and write PGM or PNG by extension"""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in IMAGE_SUFFIXES:
        raise ImageFormatError(f"unsupported output format {suffix or '(none)'} for {path}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if suffix == ".pgm":
        _save_pgm(img, path)
    else:
        _save_png(img, path)


def list_images(directory: PathLike) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"image directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_dir(directory: PathLike) -> List[Tuple[str, GrayImage]]:
    """All PGM/PNG images of a directory as (stem, image), sorted by file name"""
    paths = list_images(directory)
    if not paths:
        logger.warning(f"⚠️ No PGM/PNG images in {directory}")
    return [(p.stem, load(p)) for p in paths]


# Synthetic corpus

SYNTH_MIN_SIZE = 8


def _triangle_mask(xx: np.ndarray, yy: np.ndarray, vertices: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Integer edge-function test; works for either vertex orientation"""
    edges = []
    for i in range(3):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % 3]
        edges.append((x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0))
    e0, e1, e2 = edges
    return ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))


def _synth_image(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.int64)
    lo_x, hi_x = width // 8, width - width // 8
    lo_y, hi_y = height // 8, height - height // 8

    # smooth background ramp, levels 16..62
    sx, sy = (int(s) for s in rng.integers(0, 17, size=2))
    img = 16 + int(rng.integers(0, 17)) + (sx * xx) // width + (sy * yy) // height

    # step edge through the central region, crossing the whole image
    a, b = 0, 0
    while a == 0 and b == 0:
        a, b = (int(s) for s in rng.integers(-3, 4, size=2))
    px = int(rng.integers(width // 4, width - width // 4))
    py = int(rng.integers(height // 4, height - height // 4))
    img = np.where(a * xx + b * yy > a * px + b * py, int(rng.integers(150, 201)), img)

    # polygons kept away from the border so the step edge stays visible there
    mid_x, mid_y = width // 2, height // 2
    vertices = [
        (int(rng.integers(lo_x, max(mid_x, lo_x + 1))), int(rng.integers(lo_y, max(mid_y, lo_y + 1)))),
        (int(rng.integers(mid_x, hi_x)), int(rng.integers(lo_y, max(mid_y, lo_y + 1)))),
        (int(rng.integers(lo_x, hi_x)), int(rng.integers(mid_y, hi_y))),
    ]
    img = np.where(_triangle_mask(xx, yy, vertices), int(rng.integers(0, 201)), img)
    x0, x1 = sorted(int(s) for s in rng.integers(lo_x, hi_x, size=2))
    y0, y1 = sorted(int(s) for s in rng.integers(lo_y, hi_y, size=2))
    rect = (xx >= x0) & (xx <= x1) & (yy >= y0) & (yy <= y1)
    img = np.where(rect, int(rng.integers(0, 201)), img)

    # triangular-wave grating texture, amplitude 0..12
    amp = int(rng.integers(0, 13))
    period = int(rng.integers(3, 9))
    fx, fy = (int(s) for s in rng.integers(0, 2, size=2))
    phase = int(rng.integers(0, 2 * period))
    wave = np.abs((fx * xx + fy * yy + phase) % (2 * period) - period)
    img = img + (amp * wave) // period
    return img


def synth_corpus(n: int, size: Tuple[int, int] = (64, 64), seed: int = 0) -> List[GrayImage]:
    """Deterministic edge-rich test images built with integer arithmetic only.

    Each image mixes a ramp background, a high-contrast step edge that crosses
    the image, a triangle, a rectangle and a triangular grating. Values stay
    in [0, 212] and the step edge keeps a jump of at least 64 somewhere
    near the border.
    """
    if n < 1:
        raise ConfigError(f"corpus size must be at least 1, got {n}")
    width, height = size
    if width < SYNTH_MIN_SIZE or height < SYNTH_MIN_SIZE:
        raise ConfigError(f"synthetic images need at least {SYNTH_MIN_SIZE}x{SYNTH_MIN_SIZE} pixels")
    images = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        images.append(GrayImage.from_array(_synth_image(rng, width, height).astype(float)))
    return images
