"""Run configuration: YAML parsing, defaults, line-anchored validation.

A config document is a single key/value tree.  Only ``input_dir`` and
``output_dir`` are required; every other knob falls back to the baseline
defaults baked into the parameter dataclasses (20-100% area crops, no IoU
constraint, 100% baseline policy).  Validation collects every violation
before raising so an operator fixes a bad file in one round trip.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .compositor import AugPolicy, ViewPairConfig
from .cropper import CropParams, ResizeTargetParams
from .gdomain import SolverSettings
from .saliency import STRATEGY_MODES, SaliencyStrategy
from .warp import AppearanceParams, ElasticParams


class ConfigError(ValueError):
    """Invalid run configuration; .violations lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        noun = "problem" if len(self.violations) == 1 else "problems"
        super().__init__(
            f"invalid config ({len(self.violations)} {noun}):\n  "
            + "\n  ".join(self.violations)
        )


@dataclass(frozen=True)
class PipelineConfig:
    """One batch run: corpus locations, seeding, parallelism, view recipe."""

    input_dir: Path
    output_dir: Path
    saliency_dir: Path | None = None
    master_seed: int = 0
    pairs_per_image: int = 1
    workers: int = 1
    view: ViewPairConfig = ViewPairConfig()

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")
        if self.pairs_per_image < 1:
            raise ValueError("pairs_per_image must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class _Bad(Exception):
    """Field-level validation failure; str(self) is the message."""


def _as_int(v):
    # bool is an int subclass; reject it explicitly
    if isinstance(v, bool) or not isinstance(v, int):
        raise _Bad("expected an integer")
    return v


def _as_num(v):
    if isinstance(v, bool):
        raise _Bad("expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        # YAML 1.1 reads bare exponent forms like 1e-6 as strings
        try:
            return float(v)
        except ValueError:
            raise _Bad("expected a number") from None
    raise _Bad("expected a number")


def _as_bool(v):
    if not isinstance(v, bool):
        raise _Bad("expected true or false")
    return v


def _as_path(v):
    if not isinstance(v, str) or not v:
        raise _Bad("expected a non-empty path")
    return Path(v)


def _seed(v):
    x = _as_int(v)
    if not 0 <= x < 2**64:
        raise _Bad("must fit in an unsigned 64-bit integer")
    return x


def _count(v):
    x = _as_int(v)
    if x < 1:
        raise _Bad("must be >= 1")
    return x


def _nonneg_int(v):
    x = _as_int(v)
    if x < 0:
        raise _Bad("must be >= 0")
    return x


def _fraction(v):
    x = _as_num(v)
    if not 0.0 < x <= 1.0:
        raise _Bad("must be in (0, 1]")
    return x


def _unit(v):
    x = _as_num(v)
    if not 0.0 <= x <= 1.0:
        raise _Bad("must be in [0, 1]")
    return x


def _hue(v):
    x = _as_num(v)
    if not 0.0 <= x <= 0.5:
        raise _Bad("must be in [0, 0.5]")
    return x


def _positive(v):
    x = _as_num(v)
    if x <= 0:
        raise _Bad("must be > 0")
    return x


def _nonneg(v):
    x = _as_num(v)
    if x < 0:
        raise _Bad("must be >= 0")
    return x


def _num_pair(v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise _Bad("expected [low, high]")
    lo, hi = _as_num(v[0]), _as_num(v[1])
    if not 0 < lo <= hi:
        raise _Bad("needs 0 < low <= high")
    return (lo, hi)


def _side_pair(v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise _Bad("expected [low, high]")
    lo, hi = _as_int(v[0]), _as_int(v[1])
    if not 1 <= lo <= hi:
        raise _Bad("needs 1 <= low <= high")
    return (lo, hi)


def _mode(v):
    if v not in STRATEGY_MODES:
        raise _Bad("must be one of " + ", ".join(STRATEGY_MODES))
    return v


# yaml key -> (dataclass kwarg, checker), one table per section
_SECTIONS = {
    "crop": (
        CropParams,
        {
            "min_area_frac": ("min_area_frac", _fraction),
            "max_area_frac": ("max_area_frac", _fraction),
            "aspect_range": ("crop_aspect_range", _num_pair),
            "iou_threshold": ("iou_threshold", _unit),
            "max_rejection_tries": ("max_rejection_tries", _count),
        },
    ),
    "resize": (
        ResizeTargetParams,
        {
            "aspect_range": ("aspect_range", _num_pair),
            "side_range": ("side_range", _side_pair),
        },
    ),
    "saliency": (
        SaliencyStrategy,
        {
            "mode": ("mode", _mode),
            "binarize_threshold": ("binarize_threshold", _unit),
            "min_component_area": ("min_component_area", _count),
            "overlap_fraction": ("overlap_fraction", _unit),
            "box_padding": ("box_padding", _nonneg_int),
        },
    ),
    "policy": (
        AugPolicy,
        {
            "poisson_blend": ("poisson_blend", _unit),
            "texture_flatten": ("texture_flatten", _unit),
            "elastic": ("elastic", _unit),
            "baseline": ("baseline", _unit),
            "tfns": ("tfns_enabled", _as_bool),
            "rand_gray": ("rand_gray_enabled", _as_bool),
        },
    ),
    "appearance": (
        AppearanceParams,
        {
            "hflip_prob": ("hflip_prob", _unit),
            "jitter_prob": ("jitter_prob", _unit),
            "jitter_brightness": ("jitter_brightness", _nonneg),
            "jitter_contrast": ("jitter_contrast", _nonneg),
            "jitter_saturation": ("jitter_saturation", _nonneg),
            "jitter_hue": ("jitter_hue", _hue),
            "grayscale_prob": ("grayscale_prob", _unit),
            "blur_prob": ("blur_prob", _unit),
            "blur_sigma_range": ("blur_sigma_range", _num_pair),
        },
    ),
    "elastic": (
        ElasticParams,
        {
            "alpha": ("alpha", _nonneg),
            "sigma": ("sigma", _positive),
        },
    ),
    "solver": (
        SolverSettings,
        {
            "tolerance": ("tolerance", _positive),
            "max_iterations": ("max_iterations", _count),
        },
    ),
    "edges": (
        None,  # lands on ViewPairConfig.edge_low / edge_high directly
        {
            "low": ("edge_low", _nonneg),
            "high": ("edge_high", _nonneg),
        },
    ),
}

_TOP_FIELDS = {
    "input_dir": ("input_dir", _as_path),
    "output_dir": ("output_dir", _as_path),
    "saliency_dir": ("saliency_dir", _as_path),
    "master_seed": ("master_seed", _seed),
    "pairs_per_image": ("pairs_per_image", _count),
    "workers": ("workers", _count),
}

_REQUIRED = ("input_dir", "output_dir")


def _mapping_items(loader, node, dotted, problems):
    """MappingNode -> {key: (value_node, key_line)}, flagging duplicates."""
    out = {}
    for key_node, value_node in node.value:
        line = key_node.start_mark.line + 1
        key = loader.construct_object(key_node, deep=True)
        if not isinstance(key, str):
            problems.append(f"line {line}: {dotted}keys must be strings")
            continue
        if key in out:
            problems.append(f"line {line}: duplicate key '{dotted}{key}'")
            continue
        out[key] = (value_node, line)
    return out


def parse_config(text: str) -> PipelineConfig:
    """Parse and validate a config document; raise ConfigError on any problem."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else 1
        raise ConfigError([f"line {line}: {e.problem}"]) from None
    except yaml.YAMLError as e:
        raise ConfigError([f"line 1: {e}"]) from None

    loader = yaml.SafeLoader("")
    problems: list[str] = []
    if root is None:
        top = {}
    elif not isinstance(root, yaml.MappingNode):
        raise ConfigError(["line 1: top level must be a mapping"])
    else:
        top = _mapping_items(loader, root, "", problems)

    pipeline_kwargs: dict = {}
    section_values: dict[str, dict] = {}
    section_lines: dict[str, int] = {}
    section_clean: dict[str, bool] = {}

    for key, (vnode, line) in top.items():
        if key in _TOP_FIELDS:
            kwarg, check = _TOP_FIELDS[key]
            try:
                pipeline_kwargs[kwarg] = check(loader.construct_object(vnode, deep=True))
            except _Bad as bad:
                problems.append(f"line {line}: {key}: {bad}")
        elif key in _SECTIONS:
            _, fields = _SECTIONS[key]
            section_lines[key] = line
            if not isinstance(vnode, yaml.MappingNode):
                problems.append(f"line {line}: {key}: expected a mapping")
                continue
            kwargs: dict = {}
            clean = True
            for sub, (sub_node, sub_line) in _mapping_items(
                loader, vnode, key + ".", problems
            ).items():
                if sub not in fields:
                    problems.append(f"line {sub_line}: unknown key '{key}.{sub}'")
                    clean = False
                    continue
                kwarg, check = fields[sub]
                try:
                    kwargs[kwarg] = check(loader.construct_object(sub_node, deep=True))
                except _Bad as bad:
                    problems.append(f"line {sub_line}: {key}.{sub}: {bad}")
                    clean = False
            section_values[key] = kwargs
            section_clean[key] = clean
        else:
            problems.append(f"line {line}: unknown key '{key}'")

    for key in _REQUIRED:
        if key not in top:
            problems.append(f"line 1: {key}: required")

    view_kwargs: dict = {}
    for name, (cls, _fields) in _SECTIONS.items():
        if name not in section_values or not section_clean[name]:
            continue  # missing section keeps defaults; dirty one already reported
        kwargs = section_values[name]
        line = section_lines[name]
        if cls is None:
            view_kwargs.update(kwargs)
            lo = kwargs.get("edge_low", 30.0)
            hi = kwargs.get("edge_high", 45.0)
            if hi < lo:
                problems.append(f"line {line}: edges: high must be >= low")
            continue
        try:
            built = cls(**kwargs)
        except ValueError as e:
            problems.append(f"line {line}: {name}: {e}")
            continue
        key_map = {
            "crop": "crop",
            "resize": "resize",
            "saliency": "strategy",
            "policy": "policy",
            "appearance": "appearance",
            "elastic": "elastic",
            "solver": "solver",
        }
        view_kwargs[key_map[name]] = built

    if problems:
        raise ConfigError(problems)

    try:
        return PipelineConfig(view=ViewPairConfig(**view_kwargs), **pipeline_kwargs)
    except ValueError as e:
        raise ConfigError([f"line 1: {e}"]) from None


def validate_config(path: str | Path) -> PipelineConfig:
    """Read a config file and validate it.  I/O errors propagate as OSError."""
    return parse_config(Path(path).read_text())
