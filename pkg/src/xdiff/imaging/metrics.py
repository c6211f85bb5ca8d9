"""
Image quality metrics: PSNR against a reference and a no-reference blur estimate
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from ..errors import GridError
from ..numerics.field import ScalarField

PEAK = 255.0
BLUR_KERNEL = 9


@dataclass(frozen=True)
class EvalRow:
    """Per-image evaluation result; psnr_db is +inf for identical images"""
    image_id: str
    psnr_db: float
    blur: float

    @property
    def psnr_is_infinite(self) -> bool:
        return math.isinf(self.psnr_db)


def mse(restored: ScalarField, reference: ScalarField) -> float:
    if restored.grid.shape != reference.grid.shape:
        raise GridError(f"cannot compare images of shape {restored.grid.shape} and {reference.grid.shape}")
    diff = restored.values - reference.values
    return float(np.mean(diff * diff))


def psnr(restored: ScalarField, reference: ScalarField) -> float:
    """10 log10(255^2 / MSE) in dB, +inf when the images coincide"""
    err = mse(restored, reference)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK ** 2 / err)


def _directional_blur(values: np.ndarray, axis: int) -> Optional[float]:
    """Blur along one axis, None when the image does not vary along it"""
    blurred = ndimage.uniform_filter1d(values, size=BLUR_KERNEL, axis=axis, mode="nearest")
    d_orig = np.abs(np.diff(values, axis=axis))
    d_blur = np.abs(np.diff(blurred, axis=axis))
    total = float(np.sum(d_orig))
    if total == 0.0:
        return None
    variation = float(np.sum(np.maximum(0.0, d_orig - d_blur)))
    return (total - variation) / total


def blur(image: ScalarField) -> float:
    """No-reference blur in [0, 1]; higher is blurrier.

    Compares neighbour differences of the image with those of its 1x9 / 9x1
    box-filtered version and keeps the worse of the directions that vary.
    Only an image without any variation counts as fully blurred.
    """
    if image.grid.n1 < 3 or image.grid.n2 < 3:
        raise GridError(f"blur needs at least a 3x3 image, got {image.grid.n1}x{image.grid.n2}")
    values = image.values
    scores = [s for s in (_directional_blur(values, 0), _directional_blur(values, 1)) if s is not None]
    if not scores:
        return 1.0
    return min(max(max(scores), 0.0), 1.0)


def box_blur(image: ScalarField) -> ScalarField:
    """Separable 9-tap box filter with edge replication"""
    values = ndimage.uniform_filter1d(image.values, size=BLUR_KERNEL, axis=0, mode="nearest")
    values = ndimage.uniform_filter1d(values, size=BLUR_KERNEL, axis=1, mode="nearest")
    return ScalarField(image.grid, values)
