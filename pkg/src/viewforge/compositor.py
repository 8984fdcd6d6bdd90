"""Composite query/key view assembly.

Each item runs as a pure function of (source image, saliency, config,
backgrounds, item_seed): every random decision draws from a stage-tagged
stream derived from the item seed, so records are byte-identical across
runs and across worker counts.

The query view carries the shortcut-reducing transform chosen by the policy
(Poisson blend, texture flattening or its saliency-aware variants, elastic);
the key view is only ever cropped, resized, pasted, and appearance-augmented.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BinaryMask,
    PixelBox,
    RasterImage,
    SeededRng,
    derive_stream,
    iou,
    resize_bilinear,
)
from .cropper import CropParams, ResizeTargetParams, sample_constrained_pair, sample_resize_target
from .gdomain import NoConvergence, SolverSettings, seamless_clone, texture_flatten, texture_flatten_region
from .saliency import (
    NoSalientObject,
    SaliencyMap,
    SaliencyStrategy,
    binarize,
    extract_object_boxes,
    rand_gray_background,
    sample_overlap_crop,
    tightened_source_crop,
)
from .warp import AppearanceParams, ElasticParams, apply_appearance, elastic_deform

log = logging.getLogger(__name__)

VIEW_SIDE = 256

# stage tags for per-item stream derivation; reordering breaks replay
STAGE_SOURCE = 1
STAGE_CROP = 2
STAGE_POLICY = 3
STAGE_QUERY_TRANSFORM = 4
STAGE_APPEAR_QUERY = 5
STAGE_APPEAR_KEY = 6
STAGE_COMPOSE_QUERY = 7
STAGE_COMPOSE_KEY = 8

POLICY_BRANCHES = ("poisson_blend", "texture_flatten", "elastic", "baseline")


class GeometryError(ValueError):
    """Paste target does not fit the canvas; indicates a caller bug."""


@dataclass(frozen=True)
class AugPolicy:
    """Mixing weights over the query-side transform branches.

    tfns_enabled swaps the texture_flatten branch for its non-salient-only
    variant; rand_gray_enabled swaps the same branch for the random-gray
    background replacement.  The two flags are mutually exclusive.
    """

    poisson_blend: float = 0.0
    texture_flatten: float = 0.0
    elastic: float = 0.0
    baseline: float = 1.0
    tfns_enabled: bool = False
    rand_gray_enabled: bool = False

    def __post_init__(self):
        weights = [getattr(self, name) for name in POLICY_BRANCHES]
        if any(w < 0 for w in weights):
            raise ValueError("policy weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"policy weights must sum to 1, got {sum(weights)}")
        if self.tfns_enabled and self.rand_gray_enabled:
            raise ValueError("tfns_enabled and rand_gray_enabled are mutually exclusive")

    def draw_branch(self, rng: SeededRng) -> str:
        u = rng.gen.random()
        acc = 0.0
        for name in POLICY_BRANCHES:
            acc += getattr(self, name)
            if u < acc:
                return name
        return "baseline"


@dataclass(frozen=True)
class ViewPairConfig:
    """Everything make_view_pair needs besides the per-item inputs."""

    crop: CropParams = CropParams()
    resize: ResizeTargetParams = ResizeTargetParams()
    strategy: SaliencyStrategy = SaliencyStrategy()
    policy: AugPolicy = AugPolicy()
    appearance: AppearanceParams = AppearanceParams()
    elastic: ElasticParams = ElasticParams()
    solver: SolverSettings = SolverSettings()
    edge_low: float = 30.0
    edge_high: float = 45.0


@dataclass(frozen=True)
class ViewPairRecord:
    """One finished query/key composite pair plus its provenance."""

    query_img: RasterImage
    key_img: RasterImage
    query_box: PixelBox
    key_box: PixelBox
    query_src_box: PixelBox
    key_src_box: PixelBox
    source_path: str
    item_seed: int
    strategy_used: str
    iou_achieved: float
    constraint_satisfied: bool

    def __post_init__(self):
        for img in (self.query_img, self.key_img):
            if (img.width, img.height) != (VIEW_SIDE, VIEW_SIDE):
                raise ValueError(f"views must be {VIEW_SIDE}x{VIEW_SIDE}")
        for box in (self.query_box, self.key_box):
            if not box.inside(VIEW_SIDE, VIEW_SIDE):
                raise ValueError(f"RoI {box} outside the view")


def normalize_background(img: RasterImage) -> RasterImage:
    """Center-crop to square, then resize to the view side."""
    side = min(img.width, img.height)
    x0 = (img.width - side) // 2
    y0 = (img.height - side) // 2
    return resize_bilinear(img.crop(PixelBox(x0, y0, x0 + side, y0 + side)), VIEW_SIDE, VIEW_SIDE)


def compose_view(
    fg: RasterImage,
    bg: RasterImage,
    target: tuple[int, int],
    paste_xy: tuple[int, int],
    blend: str,
    settings: SolverSettings,
) -> tuple[RasterImage, PixelBox]:
    """Resize fg to target and commit it onto bg at paste_xy.

    blend "paste" copies pixels; "poisson" imports fg's gradients via a
    seamless clone over the paste rectangle.  Returns the composite and the
    foreground RoI box.
    """
    if (bg.width, bg.height) != (VIEW_SIDE, VIEW_SIDE):
        raise ValueError(f"background must be {VIEW_SIDE}x{VIEW_SIDE}")
    if blend not in ("paste", "poisson"):
        raise ValueError(f"unknown blend mode {blend!r}")
    tw, th = target
    px, py = paste_xy
    if px < 0 or py < 0 or px + tw > bg.width or py + th > bg.height:
        raise GeometryError(f"target {tw}x{th} at ({px}, {py}) does not fit the canvas")
    resized = resize_bilinear(fg, tw, th)
    box = PixelBox(px, py, px + tw, py + th)
    if blend == "paste":
        out = bg.data.copy()
        out[py : py + th, px : px + tw] = resized.data
        return RasterImage(out), box
    composite = seamless_clone(
        resized, bg, BinaryMask.full(tw, th, True), (px, py), settings
    )
    return composite, box


def _crop_source_box(
    src: RasterImage,
    mask: BinaryMask | None,
    cfg: ViewPairConfig,
    item_seed: int,
    tags: list[str],
) -> PixelBox:
    """Resolve the rectangle crops are sampled from, per strategy mode."""
    full = PixelBox(0, 0, src.width, src.height)
    mode = cfg.strategy.mode
    if mode in ("none", "overlap_constraint") or mask is None:
        return full
    boxes = extract_object_boxes(mask, cfg.strategy.min_component_area)
    try:
        box = tightened_source_crop(
            src, boxes, cfg.strategy.box_padding, derive_stream(item_seed, 0, STAGE_SOURCE)
        )
    except NoSalientObject:
        tags.append("no_salient_fallback")
        return full
    tags.append(mode)
    return box


def _transform_query_crop(
    crop: RasterImage,
    crop_mask: BinaryMask | None,
    branch: str,
    cfg: ViewPairConfig,
    rng: SeededRng,
    tags: list[str],
) -> tuple[RasterImage, str]:
    """Apply the drawn policy branch to the query crop; returns (crop, blend)."""
    if branch == "poisson_blend":
        tags.append("poisson_blend")
        return crop, "poisson"
    if branch == "elastic":
        tags.append("elastic")
        return elastic_deform(crop, cfg.elastic, rng), "paste"
    if branch == "texture_flatten":
        if cfg.policy.rand_gray_enabled:
            if crop_mask is None:
                tags.append("rand_gray_skipped_no_saliency")
                return crop, "paste"
            tags.append("rand_gray_bg")
            return rand_gray_background(crop, crop_mask, rng), "paste"
        if crop.width < 3 or crop.height < 3:
            tags.append("flatten_skipped_tiny_crop")
            return crop, "paste"
        if cfg.policy.tfns_enabled and crop_mask is not None:
            tags.append("tfns")
            flat = texture_flatten_region(
                crop, crop_mask, cfg.edge_low, cfg.edge_high, cfg.solver
            )
            return flat, "paste"
        if cfg.policy.tfns_enabled:
            tags.append("tfns_degraded_no_saliency")
        else:
            tags.append("texture_flatten")
        return texture_flatten(crop, cfg.edge_low, cfg.edge_high, cfg.solver), "paste"
    tags.append("baseline")
    return crop, "paste"


def _compose_with_fallback(
    crop: RasterImage,
    bg: RasterImage,
    blend: str,
    cfg: ViewPairConfig,
    rng: SeededRng,
    tags: list[str],
) -> tuple[RasterImage, PixelBox]:
    tw, th = sample_resize_target(cfg.resize, rng)
    tw, th = min(tw, VIEW_SIDE), min(th, VIEW_SIDE)
    g = rng.gen
    px = int(g.integers(0, VIEW_SIDE - tw + 1))
    py = int(g.integers(0, VIEW_SIDE - th + 1))
    try:
        return compose_view(crop, bg, (tw, th), (px, py), blend, cfg.solver)
    except NoConvergence as exc:
        # degrade rather than abort a long run; the manifest keeps the trace
        log.warning("poisson blend failed (residual %.3g); pasting instead", exc.residual)
        tags.append("poisson_failed_paste")
        return compose_view(crop, bg, (tw, th), (px, py), "paste", cfg.solver)


def make_view_pair(
    src: RasterImage,
    saliency: SaliencyMap | None,
    cfg: ViewPairConfig,
    bgs: tuple[RasterImage, RasterImage],
    item_seed: int,
    source_path: str = "",
) -> ViewPairRecord:
    """Build one query/key composite pair from a source image."""
    if src.channels != 3:
        raise ValueError("source images must be 3-channel")
    for bg in bgs:
        if (bg.width, bg.height) != (VIEW_SIDE, VIEW_SIDE) or bg.channels != 3:
            raise ValueError(f"backgrounds must be 3-channel {VIEW_SIDE}x{VIEW_SIDE}")
    if saliency is not None and (saliency.height, saliency.width) != (src.height, src.width):
        raise ValueError(
            f"saliency {saliency.width}x{saliency.height} does not match "
            f"source {src.width}x{src.height}"
        )

    tags: list[str] = []
    # the binarized map serves both the crop-source strategies and the
    # saliency-aware policy branches, so build it independent of mode
    mask = (
        binarize(saliency, cfg.strategy.binarize_threshold) if saliency is not None else None
    )
    if cfg.strategy.mode != "none" and mask is None:
        tags.append("no_saliency_fallback")
    source_box = _crop_source_box(src, mask, cfg, item_seed, tags)

    crop_rng = derive_stream(item_seed, 0, STAGE_CROP)
    if cfg.strategy.mode == "overlap_constraint" and mask is not None:
        tags.append("overlap_constraint")

        def draw(w, h, params, rng):
            return sample_overlap_crop(
                (w, h), mask, params, cfg.strategy.overlap_fraction, rng
            )

        q_rel, k_rel, satisfied = sample_constrained_pair(
            source_box.width, source_box.height, cfg.crop, crop_rng, draw=draw
        )
    else:
        q_rel, k_rel, satisfied = sample_constrained_pair(
            source_box.width, source_box.height, cfg.crop, crop_rng
        )
    query_src_box = q_rel.shifted(source_box.x0, source_box.y0)
    key_src_box = k_rel.shifted(source_box.x0, source_box.y0)
    pair_iou = iou(query_src_box, key_src_box)

    query_crop = src.crop(query_src_box)
    key_crop = src.crop(key_src_box)
    query_mask = mask.crop(query_src_box) if mask is not None else None

    branch = cfg.policy.draw_branch(derive_stream(item_seed, 0, STAGE_POLICY))
    query_crop, blend = _transform_query_crop(
        query_crop,
        query_mask,
        branch,
        cfg,
        derive_stream(item_seed, 0, STAGE_QUERY_TRANSFORM),
        tags,
    )

    query_crop = apply_appearance(
        query_crop, cfg.appearance, derive_stream(item_seed, 0, STAGE_APPEAR_QUERY)
    )
    key_crop = apply_appearance(
        key_crop, cfg.appearance, derive_stream(item_seed, 0, STAGE_APPEAR_KEY)
    )

    query_img, query_box = _compose_with_fallback(
        query_crop, bgs[0], blend, cfg, derive_stream(item_seed, 0, STAGE_COMPOSE_QUERY), tags
    )
    key_img, key_box = _compose_with_fallback(
        key_crop, bgs[1], "paste", cfg, derive_stream(item_seed, 0, STAGE_COMPOSE_KEY), tags
    )

    return ViewPairRecord(
        query_img=query_img,
        key_img=key_img,
        query_box=query_box,
        key_box=key_box,
        query_src_box=query_src_box,
        key_src_box=key_src_box,
        source_path=source_path,
        item_seed=item_seed,
        strategy_used="+".join(tags),
        iou_achieved=pair_iou,
        constraint_satisfied=satisfied,
    )
