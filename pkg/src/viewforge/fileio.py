"""Image file ingestion and output: PNG/JPEG decode, PNG encode."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .core import RasterImage


def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG or JPEG file; grayscale stays 1-channel, everything else becomes RGB."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    return RasterImage.from_array(arr)


def load_gray(path: str | Path) -> np.ndarray:
    """Decode a file as 8-bit grayscale (H, W)."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8)


def save_png(img: RasterImage, path: str | Path) -> None:
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    Image.fromarray(arr, mode="L" if img.channels == 1 else "RGB").save(path, format="PNG")
