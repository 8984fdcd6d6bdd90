"""Crop sampling: area-fraction crops, IoU-constrained pairs, resize targets.

Boxes are half-open pixel rectangles in source-image coordinates.  All
randomness flows through an explicit SeededRng so identical streams replay
identical geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .core import PixelBox, SeededRng, iou


class DegenerateGeometry(ValueError):
    """No box satisfying the requested area band fits the image."""


@dataclass(frozen=True)
class CropParams:
    """Knobs for area-fraction crop sampling and pair constraints."""

    min_area_frac: float = 0.20
    max_area_frac: float = 1.0
    crop_aspect_range: tuple[float, float] = (0.5, 2.0)
    iou_threshold: float = 0.0
    max_rejection_tries: int = 100

    def __post_init__(self):
        if not (0.0 < self.min_area_frac <= self.max_area_frac <= 1.0):
            raise ValueError(
                f"need 0 < min {self.min_area_frac} <= max {self.max_area_frac} <= 1"
            )
        lo, hi = self.crop_aspect_range
        if not (0.0 < lo <= hi):
            raise ValueError(f"bad aspect range ({lo}, {hi})")
        if not (0.0 <= self.iou_threshold < 1.0):
            raise ValueError(f"iou threshold {self.iou_threshold} outside [0, 1)")
        if self.max_rejection_tries < 1:
            raise ValueError("max_rejection_tries must be at least 1")


@dataclass(frozen=True)
class ResizeTargetParams:
    """Output-size sampling for view crops."""

    aspect_range: tuple[float, float] = (0.5, 2.0)
    side_range: tuple[int, int] = (128, 256)

    def __post_init__(self):
        alo, ahi = self.aspect_range
        if not (0.0 < alo <= ahi):
            raise ValueError(f"bad aspect range ({alo}, {ahi})")
        slo, shi = self.side_range
        if not (1 <= slo <= shi):
            raise ValueError(f"bad side range ({slo}, {shi})")


def _area_band(frac_lo: float, frac_hi: float, total: int) -> tuple[int, int]:
    """Integer pixel areas whose fraction of total stays in [frac_lo, frac_hi]
    under float division, so downstream checks never see an out-of-band box."""
    a_lo = max(1, math.ceil(frac_lo * total))
    while a_lo > 1 and (a_lo - 1) / total >= frac_lo:
        a_lo -= 1
    while a_lo / total < frac_lo:
        a_lo += 1
    a_hi = min(total, math.floor(frac_hi * total))
    while a_hi < total and (a_hi + 1) / total <= frac_hi:
        a_hi += 1
    while a_hi >= 1 and a_hi / total > frac_hi:
        a_hi -= 1
    return a_lo, a_hi


def sample_area_crop(img_w: int, img_h: int, p: CropParams, rng: SeededRng) -> PixelBox:
    """Sample one crop box with area fraction uniform in [min, max].

    The realized integer box always lands inside the requested fraction band
    and inside the image; aspect is drawn log-uniformly then clamped to what
    the area allows.
    """
    if img_w < 1 or img_h < 1:
        raise DegenerateGeometry(f"cannot crop a {img_w}x{img_h} image")
    total = img_w * img_h
    a_lo, a_hi = _area_band(p.min_area_frac, p.max_area_frac, total)
    if a_lo > a_hi:
        raise DegenerateGeometry(
            f"no integer area in fraction band [{p.min_area_frac}, "
            f"{p.max_area_frac}] of {img_w}x{img_h}"
        )
    g = rng.gen
    frac = g.uniform(p.min_area_frac, p.max_area_frac)
    target = min(max(round(frac * total), a_lo), a_hi)

    lo, hi = p.crop_aspect_range
    ratio = math.exp(g.uniform(math.log(lo), math.log(hi)))
    ratio = min(max(ratio, target / (img_h * img_h)), (img_w * img_w) / target)

    h_px, w_band = _fit_height(round(math.sqrt(target / ratio)), img_w, img_h, a_lo, a_hi)
    if h_px is None:
        raise DegenerateGeometry(
            f"no box with area in [{a_lo}, {a_hi}] fits in {img_w}x{img_h}"
        )
    w_px = min(max(round(target / h_px), w_band[0]), w_band[1])
    x0 = int(g.integers(0, img_w - w_px + 1))
    y0 = int(g.integers(0, img_h - h_px + 1))
    return PixelBox(x0, y0, x0 + w_px, y0 + h_px)


def _fit_height(h_want: int, img_w: int, img_h: int, a_lo: int, a_hi: int):
    """Nearest height to h_want admitting some width with in-band area."""
    h_want = min(max(h_want, 1), img_h)
    for dh in range(img_h):
        for h in ((h_want + dh, h_want - dh) if dh else (h_want,)):
            if not 1 <= h <= img_h:
                continue
            w_lo = max(1, -(-a_lo // h))
            w_hi = min(img_w, a_hi // h)
            if w_lo <= w_hi:
                return h, (w_lo, w_hi)
    return None, None


def sample_constrained_pair(
    img_w: int,
    img_h: int,
    p: CropParams,
    rng: SeededRng,
    draw: Callable[[int, int, CropParams, SeededRng], PixelBox] = sample_area_crop,
) -> tuple[PixelBox, PixelBox, bool]:
    """Draw crop pairs until their IoU reaches the threshold.

    Exhaustion is signaled, not raised: after max_rejection_tries pairs the
    best-IoU pair seen comes back with satisfied = False so long generation
    runs never abort on an unlucky stream.
    """
    best: tuple[PixelBox, PixelBox] | None = None
    best_v = -1.0
    for _ in range(p.max_rejection_tries):
        a = draw(img_w, img_h, p, rng)
        b = draw(img_w, img_h, p, rng)
        v = iou(a, b)
        if v >= p.iou_threshold:
            return a, b, True
        if v > best_v:
            best, best_v = (a, b), v
    assert best is not None
    return best[0], best[1], False


def sample_resize_target(p: ResizeTargetParams, rng: SeededRng) -> tuple[int, int]:
    """Sample an output (width, height): height uniform over side_range,
    width from a log-uniform aspect, clamped back into side_range."""
    g = rng.gen
    slo, shi = p.side_range
    h = int(g.integers(slo, shi + 1))
    alo, ahi = p.aspect_range
    ratio = math.exp(g.uniform(math.log(alo), math.log(ahi)))
    w = min(max(round(h * ratio), slo), shi)
    return w, h
