"""Core raster, geometry and randomness primitives shared by every module.

Conventions fixed here and relied on everywhere else:
- images are (H, W, C) uint8 arrays, top-left origin, y down;
- boxes are half-open [x0, x1) x [y0, y1) so areas are exact integers;
- random streams are counter-based (Philox) and a pure function of
  (master_seed, stream_id), which keeps per-item determinism under
  arbitrary parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix2(a: int, b: int) -> int:
    # order-sensitive 2x64 -> 64 mixing; collisions are birthday-bounded
    return _splitmix64(_splitmix64(a & _MASK64) ^ (b & _MASK64))


def fold_seed(master_seed: int, index: int) -> int:
    """Derive a per-item 64-bit seed from a master seed and an item index."""
    return _mix2(master_seed, index)


class SeededRng:
    """Deterministic random stream.

    The draw sequence is a pure function of (master_seed, stream_id);
    independent streams never share state. Backed by Philox, so streams
    with distinct identities are statistically independent.
    """

    __slots__ = ("master_seed", "stream_id", "_gen")

    def __init__(self, master_seed: int, stream_id: int):
        self.master_seed = master_seed & _MASK64
        self.stream_id = stream_id & _MASK64
        self._gen: np.random.Generator | None = None

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            bits = np.random.Philox(key=[self.master_seed, self.stream_id])
            self._gen = np.random.Generator(bits)
        return self._gen

    def __repr__(self) -> str:
        return f"SeededRng(master_seed={self.master_seed:#x}, stream_id={self.stream_id:#x})"


def derive_stream(master_seed: int, item_index: int, stage_tag: int) -> SeededRng:
    """Return the random stream for one (item, stage) pair.

    The stream depends only on the three inputs; distinct (item, stage)
    pairs map to distinct stream ids except for birthday-bounded 64-bit
    collisions.
    """
    return SeededRng(master_seed, _mix2(item_index, stage_tag))


def commit_floats(arr: np.ndarray) -> np.ndarray:
    """Clamp a floating-point working buffer to 8-bit samples."""
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


# Rec. 601 luma weights, shared by edge detection and the grayscale ops.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def luminance(img: "RasterImage") -> np.ndarray:
    """Luma plane of an image as (H, W) float64."""
    f = img.to_floats()
    if f.shape[2] == 1:
        return f[:, :, 0]
    return f @ np.asarray(LUMA_WEIGHTS, dtype=np.float64)


def _as_locked(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RasterImage:
    """8-bit image buffer, (H, W, C) with C in {1, 3}, immutable once built."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W, 1|3) array, got shape {d.shape}")
        if d.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {d.dtype}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("images must be at least 1x1")
        object.__setattr__(self, "data", _as_locked(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        """Build from a uint8 array; a 2-d array becomes a 1-channel image."""
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(np.asarray(arr, dtype=np.uint8))

    @classmethod
    def from_floats(cls, arr: np.ndarray) -> "RasterImage":
        """Commit floating-point working values (clamped to [0, 255])."""
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(commit_floats(arr))

    def to_floats(self) -> np.ndarray:
        return self.data.astype(np.float64)

    def crop(self, box: "PixelBox") -> "RasterImage":
        if not (0 <= box.x0 and 0 <= box.y0 and box.x1 <= self.width and box.y1 <= self.height):
            raise ValueError(f"{box} not inside {self.width}x{self.height} image")
        return RasterImage(self.data[box.y0:box.y1, box.x0:box.x1])


@dataclass(frozen=True)
class BinaryMask:
    """Boolean raster; marks salient regions or solver domains."""

    bits: np.ndarray

    def __post_init__(self):
        b = self.bits
        if b.ndim != 2:
            raise ValueError(f"expected (H, W) array, got shape {b.shape}")
        if b.dtype != np.bool_:
            raise ValueError(f"expected bool bits, got {b.dtype}")
        object.__setattr__(self, "bits", _as_locked(b))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())

    def crop(self, box: "PixelBox") -> "BinaryMask":
        return BinaryMask(self.bits[box.y0:box.y1, box.x0:box.x1])

    @classmethod
    def full(cls, width: int, height: int, value: bool = False) -> "BinaryMask":
        return cls(np.full((height, width), value, dtype=bool))


@dataclass(frozen=True)
class PixelBox:
    """Axis-aligned rectangle, half-open: [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def shifted(self, dx: int, dy: int) -> "PixelBox":
        return PixelBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def expanded(self, padding: int) -> "PixelBox":
        return PixelBox(self.x0 - padding, self.y0 - padding, self.x1 + padding, self.y1 + padding)

    def clipped(self, width: int, height: int) -> "PixelBox":
        """Intersect with an image extent (must still be non-empty)."""
        return PixelBox(max(self.x0, 0), max(self.y0, 0), min(self.x1, width), min(self.y1, height))

    def inside(self, width: int, height: int) -> bool:
        return 0 <= self.x0 and 0 <= self.y0 and self.x1 <= width and self.y1 <= height


def iou(a: PixelBox, b: PixelBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint, exact rationals otherwise."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _gather_bilinear(dataf: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear gather at (already in-range) float sample coordinates.

    dataf is (H, W, C) float; xs, ys are broadcast-compatible coordinate
    grids clamped to [0, W-1] / [0, H-1]. Returns float samples.
    """
    h, w = dataf.shape[:2]
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    v00 = dataf[y0, x0]
    v01 = dataf[y0, x1]
    v10 = dataf[y1, x0]
    v11 = dataf[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def _reflect_coords(coords: np.ndarray, n: int) -> np.ndarray:
    """Fold sample coordinates back into [0, n-1] by edge reflection."""
    if n == 1:
        return np.zeros_like(coords)
    period = 2.0 * n
    q = np.mod(coords + 0.5, period)
    q = np.where(q < n, q, period - q)
    return np.clip(q - 0.5, 0.0, n - 1.0)


def bilinear_sample(dataf: np.ndarray, xs: np.ndarray, ys: np.ndarray, border: str = "clamp") -> np.ndarray:
    """Sample an (H, W, C) float image at arbitrary positions.

    border: "clamp" pins out-of-range coordinates to the edge pixel,
    "reflect" folds them back across the image edges.
    """
    h, w = dataf.shape[:2]
    if border == "clamp":
        xs = np.clip(xs, 0.0, w - 1.0)
        ys = np.clip(ys, 0.0, h - 1.0)
    elif border == "reflect":
        xs = _reflect_coords(xs, w)
        ys = _reflect_coords(ys, h)
    else:
        raise ValueError(f"unknown border mode {border!r}")
    return _gather_bilinear(dataf, xs, ys)


def resize_bilinear(img: RasterImage, out_w: int, out_h: int) -> RasterImage:
    """Bilinear resampling with half-pixel-center alignment.

    Output pixel (i, j) samples the source at
    ((j + 0.5) * W/out_w - 0.5, (i + 0.5) * H/out_h - 0.5), clamped to
    the source extent.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output dims must be >= 1")
    if out_w == img.width and out_h == img.height:
        return img
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (img.width / out_w) - 0.5
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (img.height / out_h) - 0.5
    grid_x = np.broadcast_to(xs[None, :], (out_h, out_w))
    grid_y = np.broadcast_to(ys[:, None], (out_h, out_w))
    out = bilinear_sample(img.to_floats(), grid_x, grid_y, border="clamp")
    return RasterImage.from_floats(out)
