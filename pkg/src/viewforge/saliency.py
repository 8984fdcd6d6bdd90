"""Saliency-map ingestion and the object-prior crop strategies.

Maps arrive as 8-bit grayscale rasters produced by an external detector and
are matched to images by filename stem.  On top of the binarized map sit the
three strategies: overlap-constrained crops, object crops, and tightened
source crops, plus the random-gray background replacement.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import fileio
from .core import BinaryMask, PixelBox, RasterImage, SeededRng
from .cropper import CropParams, sample_area_crop

STRATEGY_MODES = ("none", "overlap_constraint", "object_crop", "tightened")

# 4-connectivity: diagonal contact does not merge components
_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)


class NoSalientObject(ValueError):
    """No usable salient component; callers fall back to the whole image."""


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel salience scores in [0, 1], same dims as the source image."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(self.scores, dtype=np.float64)
        if s.ndim != 2:
            raise ValueError(f"scores must be (H, W), got shape {s.shape}")
        if s.size and (s.min() < 0.0 or s.max() > 1.0):
            raise ValueError("scores must lie in [0, 1]")
        s.flags.writeable = False
        object.__setattr__(self, "scores", s)

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @classmethod
    def from_gray(cls, arr: np.ndarray) -> "SaliencyMap":
        """Normalize an 8-bit grayscale raster to fractional scores."""
        return cls(np.asarray(arr, dtype=np.float64) / 255.0)

    @classmethod
    def load(cls, path) -> "SaliencyMap":
        return cls.from_gray(fileio.load_gray(path))


@dataclass(frozen=True)
class SaliencyStrategy:
    """Which object prior to apply and its thresholds."""

    mode: str = "none"
    binarize_threshold: float = 0.5
    min_component_area: int = 64
    overlap_fraction: float = 0.2
    box_padding: int = 0

    def __post_init__(self):
        if self.mode not in STRATEGY_MODES:
            raise ValueError(f"mode {self.mode!r} not one of {STRATEGY_MODES}")
        if not (0.0 < self.binarize_threshold < 1.0):
            raise ValueError("binarize_threshold must be in (0, 1)")
        if not (0.0 <= self.overlap_fraction <= 1.0):
            raise ValueError("overlap_fraction must be in [0, 1]")
        if self.min_component_area < 1:
            raise ValueError("min_component_area must be at least 1")
        if self.box_padding < 0:
            raise ValueError("box_padding must be non-negative")


def binarize(smap: SaliencyMap, threshold: float) -> BinaryMask:
    """Bit set iff score >= threshold."""
    return BinaryMask(smap.scores >= threshold)


def extract_object_boxes(mask: BinaryMask, min_component_area: int = 64) -> list[PixelBox]:
    """Tight bounding boxes of 4-connected components, largest first.

    Components below min_component_area pixels are dropped.  The sort by
    descending pixel count is stable over raster discovery order, so equal
    counts keep a deterministic order.
    """
    labels, n = ndimage.label(mask.bits, structure=_FOUR_CONN)
    if n == 0:
        return []
    counts = np.bincount(labels.ravel())[1:]
    slices = ndimage.find_objects(labels)
    boxes = []
    for k in np.argsort(-counts, kind="stable"):
        if counts[k] < min_component_area:
            continue
        sy, sx = slices[k]
        boxes.append(PixelBox(sx.start, sy.start, sx.stop, sy.stop))
    return boxes


def tightened_source_crop(
    img: RasterImage, boxes: list[PixelBox], padding: int, rng: SeededRng
) -> PixelBox:
    """Pick one object box uniformly, pad it, clamp to the image."""
    if not boxes:
        raise NoSalientObject("no object boxes to tighten around")
    k = int(rng.gen.integers(0, len(boxes)))
    return boxes[k].expanded(padding).clipped(img.width, img.height)


def sample_overlap_crop(
    img_dims: tuple[int, int],
    mask: BinaryMask,
    p: CropParams,
    overlap_fraction: float,
    rng: SeededRng,
) -> PixelBox:
    """Area crop containing at least the given fraction of all set pixels.

    Rejection-samples up to p.max_rejection_tries; exhaustion returns the
    best-coverage crop seen instead of raising.
    """
    img_w, img_h = img_dims
    if (mask.height, mask.width) != (img_h, img_w):
        raise ValueError(
            f"mask {mask.width}x{mask.height} does not match image {img_w}x{img_h}"
        )
    total = mask.count()
    if total == 0:
        raise ValueError("mask has no set pixels")
    integral = np.zeros((img_h + 1, img_w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(mask.bits, axis=0), axis=1, out=integral[1:, 1:])
    need = overlap_fraction * total

    best: PixelBox | None = None
    best_cov = -1
    for _ in range(p.max_rejection_tries):
        box = sample_area_crop(img_w, img_h, p, rng)
        inside = int(
            integral[box.y1, box.x1]
            - integral[box.y0, box.x1]
            - integral[box.y1, box.x0]
            + integral[box.y0, box.x0]
        )
        if inside >= need:
            return box
        if inside > best_cov:
            best, best_cov = box, inside
    assert best is not None
    return best


def rand_gray_background(img: RasterImage, mask: BinaryMask, rng: SeededRng) -> RasterImage:
    """Replace every non-salient pixel with one random gray level."""
    if (mask.height, mask.width) != (img.height, img.width):
        raise ValueError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )
    g = int(rng.gen.integers(0, 256))
    out = img.data.copy()
    out[~mask.bits] = g
    return RasterImage(out)


def map_path_for(image_path, maps_dir) -> Path | None:
    """Saliency PNG for an image, matched by filename stem; None when absent."""
    candidate = Path(maps_dir) / (Path(image_path).stem + ".png")
    return candidate if candidate.is_file() else None
