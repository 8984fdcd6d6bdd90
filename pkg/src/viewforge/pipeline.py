"""Batch generation over an image corpus, with manifests and run statistics.

Work is split per item (one item = one query/key pair); workers are
stateless and each item's pixels depend only on (config, corpus,
item_index), so a run is byte-reproducible at any worker count.  The
parent process is the single writer of the manifest, emitting rows in
item order; killing a run mid-flight leaves a valid manifest prefix.
"""

from __future__ import annotations

import json
import logging
import multiprocessing
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .compositor import make_view_pair, normalize_background
from .config import PipelineConfig
from .core import PixelBox, RasterImage, SeededRng, derive_stream, fold_seed, iou
from .fileio import load_image, save_png
from .saliency import SaliencyMap, binarize, map_path_for

log = logging.getLogger("viewforge")

# compositor reserves per-item stage tags 1..8; the background draw gets 9
STAGE_BACKGROUNDS = 9

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

MANIFEST_NAME = "manifest.ndjson"


@dataclass(frozen=True)
class RunSummary:
    pairs_emitted: int
    warnings: list[str]
    wall_time: float


@dataclass(frozen=True)
class StatsSummary:
    rows: int
    csv_path: Path
    svg_path: Path | None


def scan_corpus(input_dir: str | Path) -> list[Path]:
    """All images under input_dir, lexicographic by path.

    The order fixes item indices and therefore every RNG stream, so it
    must never depend on filesystem enumeration order.
    """
    root = Path(input_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"input_dir {root} is not a directory")
    paths = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES),
        key=str,
    )
    if not paths:
        raise FileNotFoundError(
            f"no images ({'/'.join(_IMAGE_SUFFIXES)}) found under {root}"
        )
    return paths


def _draw_backgrounds(
    n_images: int, img_idx: int, rng: SeededRng
) -> tuple[tuple[int, int], str | None]:
    """Pick two background image indices for one item.

    Normally drawn without replacement from the corpus minus the source
    image; a corpus of fewer than 3 images cannot honor that, so the
    draw degrades (source allowed, then repeats) with a warning instead
    of refusing to run.
    """
    others = [i for i in range(n_images) if i != img_idx]
    if len(others) >= 2:
        pick = rng.gen.choice(len(others), size=2, replace=False)
        return (others[int(pick[0])], others[int(pick[1])]), None
    warning = "corpus has fewer than 3 images; a view background may repeat its source"
    if n_images >= 2:
        pick = rng.gen.choice(n_images, size=2, replace=False)
        return (int(pick[0]), int(pick[1])), warning
    return (0, 0), warning


# ---------------------------------------------------------------------------
# per-worker state: set once per process by _set_globals, read by _run_item

_G: dict = {}


@lru_cache(maxsize=32)
def _source_at(path_str: str) -> RasterImage:
    img = load_image(path_str)
    if img.channels == 1:
        img = RasterImage.from_array(np.repeat(img.data, 3, axis=2))
    return img


@lru_cache(maxsize=64)
def _background_at(path_str: str) -> RasterImage:
    return normalize_background(_source_at(path_str))


@lru_cache(maxsize=32)
def _map_at(path_str: str) -> SaliencyMap:
    return SaliencyMap.load(path_str)


def _set_globals(cfg: PipelineConfig, paths: list[Path], out_dir: Path) -> None:
    _G["cfg"], _G["paths"], _G["out"] = cfg, paths, out_dir
    _source_at.cache_clear()
    _background_at.cache_clear()
    _map_at.cache_clear()


def _load_map_for(src: RasterImage, path: Path, cfg: PipelineConfig, warnings: list[str]):
    """Saliency map for one source, or None.  Map trouble degrades, never aborts."""
    if cfg.saliency_dir is None:
        return None
    map_path = map_path_for(path, cfg.saliency_dir)
    if map_path is None:
        return None
    try:
        cand = _map_at(str(map_path))
    except Exception as e:
        warnings.append(f"{path.name}: saliency map unreadable ({e}); ignored")
        return None
    if (cand.height, cand.width) != (src.height, src.width):
        warnings.append(
            f"{path.name}: saliency map {cand.width}x{cand.height} does not match "
            f"source {src.width}x{src.height}; ignored"
        )
        return None
    return cand


def _box_list(b: PixelBox) -> list[int]:
    return [b.x0, b.y0, b.x1, b.y1]


def _salient_frac(mask, box: PixelBox) -> float:
    sub = mask.crop(box)
    return sub.count() / box.area


def _run_item(item_index: int):
    """Generate one pair: PNGs on disk plus a manifest row.

    Returns (row | None, warnings); any exception becomes a warning so a
    single bad corpus entry never kills the batch.
    """
    cfg: PipelineConfig = _G["cfg"]
    paths: list[Path] = _G["paths"]
    out_dir: Path = _G["out"]
    img_idx = item_index // cfg.pairs_per_image
    path = paths[img_idx]
    item_seed = fold_seed(cfg.master_seed, item_index)
    warnings: list[str] = []
    try:
        src = _source_at(str(path))
        smap = _load_map_for(src, path, cfg, warnings)
        bg_idx, bg_warning = _draw_backgrounds(
            len(paths), img_idx, derive_stream(item_seed, 0, STAGE_BACKGROUNDS)
        )
        if bg_warning is not None:
            warnings.append(f"item {item_index}: {bg_warning}")
        bgs = (_background_at(str(paths[bg_idx[0]])), _background_at(str(paths[bg_idx[1]])))

        record = make_view_pair(src, smap, cfg.view, bgs, item_seed, source_path=str(path))

        q_name = f"{path.stem}__{item_index}__q.png"
        k_name = f"{path.stem}__{item_index}__k.png"
        save_png(record.query_img, out_dir / q_name)
        save_png(record.key_img, out_dir / k_name)

        q_frac = k_frac = None
        if smap is not None:
            mask = binarize(smap, cfg.view.strategy.binarize_threshold)
            q_frac = _salient_frac(mask, record.query_src_box)
            k_frac = _salient_frac(mask, record.key_src_box)

        row = {
            "item_index": item_index,
            "source_path": str(path),
            "source_width": src.width,
            "source_height": src.height,
            "item_seed": record.item_seed,
            "query_path": q_name,
            "key_path": k_name,
            "query_box": _box_list(record.query_box),
            "key_box": _box_list(record.key_box),
            "query_src_box": _box_list(record.query_src_box),
            "key_src_box": _box_list(record.key_src_box),
            "iou_achieved": record.iou_achieved,
            "constraint_satisfied": record.constraint_satisfied,
            "strategy_used": record.strategy_used,
            "query_salient_frac": q_frac,
            "key_salient_frac": k_frac,
        }
        return row, warnings
    except Exception as e:
        warnings.append(f"item {item_index} ({path.name}): {e}")
        return None, warnings


def run_generate(cfg: PipelineConfig) -> RunSummary:
    """Run the full corpus: two PNGs per pair plus one manifest row each."""
    t0 = time.monotonic()
    paths = scan_corpus(cfg.input_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    indices = range(len(paths) * cfg.pairs_per_image)

    emitted = 0
    all_warnings: list[str] = []
    with open(out_dir / MANIFEST_NAME, "w") as mf:

        def consume(results) -> None:
            nonlocal emitted
            for row, warns in results:
                for w in warns:
                    log.warning("%s", w)
                all_warnings.extend(warns)
                if row is None:
                    continue
                row["warnings"] = warns
                mf.write(json.dumps(row) + "\n")
                mf.flush()  # a killed run must leave a valid manifest prefix
                emitted += 1

        if cfg.workers == 1:
            _set_globals(cfg, paths, out_dir)
            consume(map(_run_item, indices))
        else:
            with multiprocessing.Pool(
                cfg.workers, initializer=_set_globals, initargs=(cfg, paths, out_dir)
            ) as pool:
                consume(pool.imap(_run_item, indices, chunksize=1))

    return RunSummary(emitted, all_warnings, time.monotonic() - t0)


# ---------------------------------------------------------------------------
# statistics over a finished run

# every tag the texture-flatten policy slot can emit
_FLATTEN_TAGS = frozenset(
    {
        "texture_flatten",
        "tfns",
        "tfns_degraded_no_saliency",
        "rand_gray_bg",
        "rand_gray_skipped_no_saliency",
        "flatten_skipped_tiny_crop",
    }
)

_CSV_COLUMNS = (
    "item_index",
    "source_path",
    "policy_branch",
    "strategy_used",
    "iou",
    "constraint_satisfied",
    "query_area_frac",
    "key_area_frac",
    "query_salient_frac",
    "key_salient_frac",
)


def policy_branch_of(strategy_used: str) -> str:
    """Map a row's tag string back to the policy branch that was drawn."""
    tags = set(strategy_used.split("+"))
    if "poisson_blend" in tags:
        return "poisson_blend"
    if "elastic" in tags:
        return "elastic"
    if tags & _FLATTEN_TAGS:
        return "texture_flatten"
    return "baseline"


def _stats_record(row: dict) -> dict:
    q = PixelBox(*row["query_src_box"])
    k = PixelBox(*row["key_src_box"])
    total = row["source_width"] * row["source_height"]
    return {
        "item_index": row["item_index"],
        "source_path": row["source_path"],
        "policy_branch": policy_branch_of(row["strategy_used"]),
        "strategy_used": row["strategy_used"],
        "iou": iou(q, k),
        "constraint_satisfied": row["constraint_satisfied"],
        "query_area_frac": q.area / total,
        "key_area_frac": k.area / total,
        "query_salient_frac": row.get("query_salient_frac"),
        "key_salient_frac": row.get("key_salient_frac"),
    }


def _plot_histograms(recs: list[dict], out_svg: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    numeric = (
        "iou",
        "query_area_frac",
        "key_area_frac",
        "query_salient_frac",
        "key_salient_frac",
    )
    fig, axes = plt.subplots(2, 3, figsize=(13, 7.5))
    for ax, col in zip(axes.flat, numeric):
        vals = [r[col] for r in recs if r[col] is not None]
        ax.set_title(col)
        if vals:
            ax.hist(vals, bins=20, color="#4878a8")
        else:
            ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
    branch_ax = axes.flat[len(numeric)]
    counts: dict[str, int] = {}
    for r in recs:
        counts[r["policy_branch"]] = counts.get(r["policy_branch"], 0) + 1
    branch_ax.set_title("policy_branch")
    if counts:
        names = sorted(counts)
        branch_ax.bar(names, [counts[n] for n in names], color="#4878a8")
        branch_ax.tick_params(axis="x", labelrotation=30)
    fig.tight_layout()
    fig.savefig(out_svg, format="svg")
    plt.close(fig)


def run_stats(
    manifest_path: str | Path, out_csv: str | Path, out_svg: str | Path | None = None
) -> StatsSummary:
    """Per-pair statistics CSV (and optional SVG histograms) from a manifest."""
    import csv

    with open(manifest_path) as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    recs = [_stats_record(row) for row in rows]

    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for rec in recs:
            writer.writerow({k: ("" if v is None else v) for k, v in rec.items()})

    if out_svg is not None:
        _plot_histograms(recs, out_svg)
    return StatsSummary(len(recs), Path(out_csv), Path(out_svg) if out_svg else None)
