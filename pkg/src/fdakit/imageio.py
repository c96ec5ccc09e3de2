"""8-bit RGB image I/O and resampling.

Working representation everywhere in the toolkit: float64 H x W x 3 array
with intensities in [0, 1]. Files are 8-bit; v/255 on load, round(v*255)
clamped to [0, 255] on save.
"""

from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from fdakit.errors import DimensionError


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64)
    return arr / 255.0


def save_image(image: np.ndarray, path) -> None:
    validate_image(image)
    quantized = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(quantized, mode="RGB").save(path)


def validate_image(image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3 image, got shape {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise DimensionError("image must be at least 1 x 1")
    if not np.all(np.isfinite(image)):
        raise DimensionError("image contains non-finite intensities")


def resize_bicubic(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bicubic resample to (out_h, out_w), clamped back to [0, 1].

    Bicubic overshoot is clipped so the [0, 1] range invariant holds.
    """
    if out_h < 1 or out_w < 1:
        raise DimensionError("output dimensions must be >= 1")
    if image.shape[0] == out_h and image.shape[1] == out_w:
        return image.copy()
    resized = cv2.resize(image, (out_w, out_h), interpolation=cv2.INTER_CUBIC)
    if resized.ndim == 2:
        resized = resized[:, :, None]
    return np.clip(resized, 0.0, 1.0)
