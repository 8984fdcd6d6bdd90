"""Deterministic contrastive-view synthesis.

Turns an image corpus into query/key composite view pairs: constrained
area crops (optionally steered by saliency maps), gradient-domain and
elastic query-side transforms, and seeded paste compositing onto
corpus backgrounds.  Every pair is a pure function of (config, corpus,
item index), so runs replay bit-for-bit at any worker count.
"""

from .compositor import (
    POLICY_BRANCHES,
    VIEW_SIDE,
    AugPolicy,
    GeometryError,
    ViewPairConfig,
    ViewPairRecord,
    compose_view,
    make_view_pair,
    normalize_background,
)
from .config import ConfigError, PipelineConfig, parse_config, validate_config
from .core import (
    BinaryMask,
    PixelBox,
    RasterImage,
    SeededRng,
    derive_stream,
    fold_seed,
    iou,
    resize_bilinear,
)
from .cropper import (
    CropParams,
    DegenerateGeometry,
    ResizeTargetParams,
    sample_area_crop,
    sample_constrained_pair,
    sample_resize_target,
)
from .fileio import load_gray, load_image, save_png
from .gdomain import (
    GuidanceField,
    NoConvergence,
    SolveDomain,
    SolverSettings,
    detect_edges,
    seamless_clone,
    solve_poisson,
    texture_flatten,
    texture_flatten_region,
)
from .pipeline import RunSummary, StatsSummary, run_generate, run_stats, scan_corpus
from .saliency import (
    STRATEGY_MODES,
    NoSalientObject,
    SaliencyMap,
    SaliencyStrategy,
    binarize,
    extract_object_boxes,
    map_path_for,
    rand_gray_background,
    sample_overlap_crop,
    tightened_source_crop,
)
from .warp import (
    AppearanceParams,
    ElasticParams,
    apply_appearance,
    displacement_field,
    elastic_deform,
)

__version__ = "0.1.0"

__all__ = [
    "AppearanceParams",
    "AugPolicy",
    "BinaryMask",
    "ConfigError",
    "CropParams",
    "DegenerateGeometry",
    "ElasticParams",
    "GeometryError",
    "GuidanceField",
    "NoConvergence",
    "NoSalientObject",
    "POLICY_BRANCHES",
    "PipelineConfig",
    "PixelBox",
    "RasterImage",
    "ResizeTargetParams",
    "RunSummary",
    "STRATEGY_MODES",
    "SaliencyMap",
    "SaliencyStrategy",
    "SeededRng",
    "SolveDomain",
    "SolverSettings",
    "StatsSummary",
    "VIEW_SIDE",
    "ViewPairConfig",
    "ViewPairRecord",
    "apply_appearance",
    "binarize",
    "compose_view",
    "derive_stream",
    "detect_edges",
    "displacement_field",
    "elastic_deform",
    "extract_object_boxes",
    "fold_seed",
    "iou",
    "load_gray",
    "load_image",
    "make_view_pair",
    "map_path_for",
    "normalize_background",
    "parse_config",
    "rand_gray_background",
    "resize_bilinear",
    "run_generate",
    "run_stats",
    "sample_area_crop",
    "sample_constrained_pair",
    "sample_overlap_crop",
    "sample_resize_target",
    "save_png",
    "scan_corpus",
    "seamless_clone",
    "solve_poisson",
    "texture_flatten",
    "texture_flatten_region",
    "tightened_source_crop",
    "validate_config",
]
