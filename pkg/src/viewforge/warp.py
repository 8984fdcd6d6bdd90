"""Elastic deformation and the stock appearance augmentations.

Appearance ops run in a fixed order (flip, jitter, grayscale, blur); one
gate uniform is always drawn per op so equal streams replay equal decisions
regardless of which gates fire.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from scipy.ndimage import gaussian_filter

from .core import LUMA_WEIGHTS, RasterImage, SeededRng, bilinear_sample, commit_floats

_LUMA = np.asarray(LUMA_WEIGHTS, dtype=np.float64)


@dataclass(frozen=True)
class ElasticParams:
    """Displacement-field warp: scale alpha in pixels, smoothing sigma."""

    alpha: float = 34.0
    sigma: float = 4.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class AppearanceParams:
    """Probabilities and strengths for the standard augmentations."""

    blur_prob: float = 0.5
    blur_sigma_range: tuple[float, float] = (0.1, 2.0)
    jitter_prob: float = 0.8
    jitter_brightness: float = 0.4
    jitter_contrast: float = 0.4
    jitter_saturation: float = 0.4
    jitter_hue: float = 0.1
    grayscale_prob: float = 0.2
    hflip_prob: float = 0.5

    def __post_init__(self):
        for name in ("blur_prob", "jitter_prob", "grayscale_prob", "hflip_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        lo, hi = self.blur_sigma_range
        if not (0.0 < lo <= hi):
            raise ValueError(f"bad blur sigma range ({lo}, {hi})")
        for name in ("jitter_brightness", "jitter_contrast", "jitter_saturation"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not (0.0 <= self.jitter_hue <= 0.5):
            raise ValueError("jitter_hue must be in [0, 0.5]")


def displacement_field(
    height: int, width: int, p: ElasticParams, rng: SeededRng
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed random displacements (dx, dy), each bounded by |alpha|."""
    g = rng.gen
    raw_x = g.uniform(-1.0, 1.0, size=(height, width))
    raw_y = g.uniform(-1.0, 1.0, size=(height, width))
    dx = gaussian_filter(raw_x, p.sigma, mode="reflect", truncate=4.0) * p.alpha
    dy = gaussian_filter(raw_y, p.sigma, mode="reflect", truncate=4.0) * p.alpha
    return dx, dy


def elastic_deform(img: RasterImage, p: ElasticParams, rng: SeededRng) -> RasterImage:
    """Resample the image along a smoothed random displacement field.

    alpha = 0 short-circuits to the unchanged input (and consumes no draws;
    callers hand each deform its own stream, so skipping is harmless).
    """
    if p.alpha == 0:
        return img
    dx, dy = displacement_field(img.height, img.width, p, rng)
    yy, xx = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    warped = bilinear_sample(img.to_floats(), xx + dx, yy + dy, border="reflect")
    return RasterImage(commit_floats(warped))


def apply_appearance(img: RasterImage, p: AppearanceParams, rng: SeededRng) -> RasterImage:
    """Flip, color-jitter, grayscale, and blur, each gated by its probability.

    Jitter factors come from [1-s, 1+s] (hue from [-s, +s]); grayscale uses
    the shared luma weights.  All math stays in float until one final commit.
    """
    if img.channels != 3:
        raise ValueError("appearance augmentations need a 3-channel image")
    g = rng.gen
    f = img.to_floats()

    if g.random() < p.hflip_prob:
        f = f[:, ::-1, :]

    if g.random() < p.jitter_prob:
        brightness = g.uniform(1.0 - p.jitter_brightness, 1.0 + p.jitter_brightness)
        contrast = g.uniform(1.0 - p.jitter_contrast, 1.0 + p.jitter_contrast)
        saturation = g.uniform(1.0 - p.jitter_saturation, 1.0 + p.jitter_saturation)
        hue_shift = g.uniform(-p.jitter_hue, p.jitter_hue)
        f = f * brightness
        mean_luma = float(np.mean(f @ _LUMA))
        f = mean_luma + (f - mean_luma) * contrast
        luma_px = (f @ _LUMA)[:, :, None]
        f = luma_px + (f - luma_px) * saturation
        if hue_shift != 0.0:
            hsv = rgb_to_hsv(np.clip(f / 255.0, 0.0, 1.0))
            hsv[:, :, 0] = (hsv[:, :, 0] + hue_shift) % 1.0
            f = hsv_to_rgb(hsv) * 255.0

    if g.random() < p.grayscale_prob:
        f = np.repeat((f @ _LUMA)[:, :, None], 3, axis=2)

    if g.random() < p.blur_prob:
        sigma = g.uniform(*p.blur_sigma_range)
        f = gaussian_filter(f, sigma=(sigma, sigma, 0.0), mode="reflect", truncate=4.0)

    return RasterImage(commit_floats(f))
