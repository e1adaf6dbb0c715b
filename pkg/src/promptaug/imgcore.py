"""Core image/mask primitives shared by every other module.

Conventions used throughout the package:
  * pixel coordinates are (x, y) with x growing rightwards and y downwards,
  * arrays are row-major numpy arrays indexed [y, x],
  * masks are boolean arrays, images are uint8 grayscale (h, w) or RGB (h, w, 3),
  * run-length encoding is column-major and always starts with a zero-run count,
    matching the uncompressed COCO convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np
from PIL import Image as _PilImage

FOREGROUND = 1
BACKGROUND = 0


class PromptAugError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(PromptAugError):
    """Two grids that must share a shape do not."""


class EmptyMask(PromptAugError):
    """An operation that needs at least one foreground pixel got none."""


class InvalidRle(PromptAugError):
    """A run-length encoding is malformed or inconsistent with its size."""


class Point(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class PointPrompt:
    """A single click prompt. Everything this package produces is a
    foreground click; the label field exists so background clicks can be
    represented at the wire level."""

    point: Point
    label: int = FOREGROUND

    def __post_init__(self):
        if self.label not in (FOREGROUND, BACKGROUND):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class Box:
    """Inclusive pixel-coordinate bounding box."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self}")
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"negative box corner {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def contains(self, p: Point) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max

    def clamped(self, width: int, height: int) -> "Box":
        return Box(
            max(0, self.x_min),
            max(0, self.y_min),
            min(width - 1, self.x_max),
            min(height - 1, self.y_max),
        )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """8-bit image, grayscale (h, w) or RGB (h, w, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"image pixels must be uint8, got {px.dtype}")
        if px.ndim == 3 and px.shape[2] != 3:
            raise ValueError(f"color images must have 3 channels, got shape {px.shape}")
        if px.ndim not in (2, 3):
            raise ValueError(f"image must be (h, w) or (h, w, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got shape {px.shape}")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def contains(self, p: Point) -> bool:
        return 0 <= p.x < self.width and 0 <= p.y < self.height


@dataclass(frozen=True)
class BinaryMask:
    """Boolean foreground mask on a pixel grid."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.dtype != np.bool_:
            raise ValueError(f"mask bits must be bool, got {bits.dtype}")
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ValueError(f"mask must be a non-degenerate 2-d grid, got shape {bits.shape}")
        object.__setattr__(self, "bits", _freeze(bits))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    def is_empty(self) -> bool:
        return not bool(self.bits.any())

    def contains(self, p: Point) -> bool:
        if not (0 <= p.x < self.width and 0 <= p.y < self.height):
            return False
        return bool(self.bits[p.y, p.x])

    @staticmethod
    def zeros(height: int, width: int) -> "BinaryMask":
        return BinaryMask(np.zeros((height, width), dtype=bool))

    @staticmethod
    def from_array(arr: np.ndarray) -> "BinaryMask":
        """Any nonzero entry becomes foreground."""
        return BinaryMask(np.asarray(arr) != 0)


@dataclass(frozen=True)
class RleMask:
    """Column-major uncompressed run-length encoding.

    `counts` alternates background/foreground run lengths over the mask
    flattened column by column, and always starts with the (possibly zero)
    leading background run.
    """

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise InvalidRle(f"degenerate size {self.height}x{self.width}")
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise InvalidRle("negative run length")
        if sum(counts) != self.height * self.width:
            raise InvalidRle(
                f"run lengths sum to {sum(counts)}, expected {self.height * self.width}"
            )
        object.__setattr__(self, "counts", counts)


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """Dice coefficient 2|A∩B| / (|A|+|B|).

    Both masks empty scores 1.0; exactly one empty scores 0.0.
    """
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.bits.shape} vs {b.bits.shape}")
    total = a.area + b.area
    if total == 0:
        return 1.0
    inter = int(np.count_nonzero(a.bits & b.bits))
    return 2.0 * inter / total


def rle_encode(mask: BinaryMask) -> RleMask:
    """Encode to canonical column-major RLE (no interior or trailing zero runs)."""
    flat = mask.bits.flatten(order="F")
    n = flat.size
    # boundaries between runs of equal values
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n]))
    lengths = (ends - starts).tolist()
    counts = lengths if not flat[0] else [0] + lengths
    return RleMask(mask.height, mask.width, tuple(counts))


def rle_decode(rle: RleMask) -> BinaryMask:
    """Decode column-major RLE. Tolerates non-canonical zero-length runs."""
    flat = np.zeros(rle.height * rle.width, dtype=bool)
    pos = 0
    value = False
    for count in rle.counts:
        if value:
            flat[pos : pos + count] = True
        pos += count
        value = not value
    return BinaryMask(flat.reshape((rle.width, rle.height)).T)


def rle_to_json_dict(rle: RleMask) -> dict:
    return {"size": [rle.height, rle.width], "counts": list(rle.counts)}


def rle_from_json_dict(obj: dict) -> RleMask:
    try:
        h, w = obj["size"]
        counts = obj["counts"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidRle(f"bad RLE object: {exc}") from exc
    if not isinstance(counts, list):
        raise InvalidRle("counts must be a list of run lengths")
    return RleMask(int(h), int(w), tuple(int(c) for c in counts))


def tight_bbox(mask: BinaryMask) -> Optional[Box]:
    """Smallest box containing all foreground pixels, or None when empty."""
    ys, xs = np.nonzero(mask.bits)
    if ys.size == 0:
        return None
    return Box(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def to_grayscale(img: Image) -> Image:
    """BT.601 luma with round-half-up, identity for grayscale input."""
    if img.channels == 1:
        return img
    px = img.pixels.astype(np.float64)
    luma = 0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]
    return Image(np.floor(luma + 0.5).astype(np.uint8))


# ---------------------------------------------------------------------------
# PNG I/O


def load_image_png(path: Union[str, Path]) -> Image:
    with _PilImage.open(path) as im:
        if im.mode == "L":
            return Image(np.asarray(im, dtype=np.uint8))
        return Image(np.asarray(im.convert("RGB"), dtype=np.uint8))


def save_image_png(img: Image, path: Union[str, Path]) -> None:
    _PilImage.fromarray(img.pixels).save(path, format="PNG")


def load_mask_png(path: Union[str, Path]) -> BinaryMask:
    """Load a mask image; any pixel with a nonzero channel is foreground."""
    with _PilImage.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        return BinaryMask(np.any(arr != 0, axis=2))
    return BinaryMask.from_array(arr)


def save_mask_png(mask: BinaryMask, path: Union[str, Path]) -> None:
    _PilImage.fromarray(mask.bits.astype(np.uint8) * 255, mode="L").save(path, format="PNG")


def save_rle_json(rle: RleMask, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(rle_to_json_dict(rle)) + "\n")


def load_rle_json(path: Union[str, Path]) -> RleMask:
    return rle_from_json_dict(json.loads(Path(path).read_text()))
