"""Dataset ingestion: paired image/mask directories and COCO annotation files.

Both loaders yield `Sample` objects and skip anything unusable (undecodable
file, missing counterpart, empty ground truth, malformed annotation) with a
logged reason; a malformed annotation *file* is a hard error. Skips are
tallied in an optional `LoaderStats` so runs can report them.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .imgcore import (
    BinaryMask,
    DimensionMismatch,
    EmptyMask,
    Image,
    PromptAugError,
    load_image_png,
    load_mask_png,
    rle_decode,
    rle_from_json_dict,
)
from .rng import SplitMix64, derive_seed

logger = logging.getLogger(__name__)


class DatasetError(PromptAugError):
    """The dataset description itself is unusable."""


@dataclass(frozen=True)
class Sample:
    """One evaluation unit: an image, its ground-truth mask, and bookkeeping."""

    id: str
    image: Image
    gt_mask: BinaryMask
    category: str
    image_path: Optional[Path] = None  # original file, lets adapters skip a re-encode

    def __post_init__(self):
        if self.image.pixels.shape[:2] != self.gt_mask.bits.shape:
            raise DimensionMismatch(
                f"{self.id}: image {self.image.pixels.shape[:2]} vs "
                f"mask {self.gt_mask.bits.shape}"
            )
        if self.gt_mask.is_empty():
            raise EmptyMask(f"{self.id}: ground truth mask is empty")


@dataclass
class LoaderStats:
    loaded: int = 0
    skipped: int = 0
    reasons: list[str] = field(default_factory=list)

    def skip(self, reason: str) -> None:
        self.skipped += 1
        self.reasons.append(reason)
        logger.warning("skipping %s", reason)


def load_dir_dataset(
    images_dir: Union[str, Path],
    masks_dir: Union[str, Path],
    *,
    dataset_name: Optional[str] = None,
    category: Optional[str] = None,
    stats: Optional[LoaderStats] = None,
) -> Iterator[Sample]:
    """Pair every PNG in `images_dir` with the same-named PNG in `masks_dir`."""
    images_dir = Path(images_dir)
    masks_dir = Path(masks_dir)
    if not images_dir.is_dir():
        raise DatasetError(f"image directory {images_dir} does not exist")
    if not masks_dir.is_dir():
        raise DatasetError(f"mask directory {masks_dir} does not exist")
    stats = stats if stats is not None else LoaderStats()
    name = dataset_name or images_dir.parent.name or images_dir.name
    for image_path in sorted(images_dir.glob("*.png")):
        mask_path = masks_dir / image_path.name
        sample_id = f"{name}/{image_path.stem}"
        if not mask_path.is_file():
            stats.skip(f"{sample_id}: no mask file {mask_path.name}")
            continue
        try:
            image = load_image_png(image_path)
            mask = load_mask_png(mask_path)
            sample = Sample(sample_id, image, mask, category or name, image_path=image_path)
        except (OSError, ValueError, PromptAugError) as exc:
            stats.skip(f"{sample_id}: {exc}")
            continue
        stats.loaded += 1
        yield sample


# ---------------------------------------------------------------------------
# Polygon rasterization

# Both the scanline fill here and its test oracle decide membership by the
# pixel *center* (x + 0.5, y + 0.5) under the even-odd rule.


def _ring_crossings(ring: np.ndarray, y_center: float) -> list[float]:
    xs = []
    n = ring.shape[0]
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if y1 == y2:
            continue  # horizontal edges never cross the half-open span
        lo, hi = (y1, y2) if y1 < y2 else (y2, y1)
        if lo <= y_center < hi:
            xs.append(x1 + (y_center - y1) * (x2 - x1) / (y2 - y1))
    return xs


def rasterize_ring(ring: Sequence[float], height: int, width: int) -> BinaryMask:
    """Even-odd scanline fill of one closed polygon ring over pixel centers."""
    coords = np.asarray(ring, dtype=np.float64).reshape(-1, 2)
    bits = np.zeros((height, width), dtype=bool)
    y_lo = max(0, int(math.floor(coords[:, 1].min() - 1)))
    y_hi = min(height - 1, int(math.ceil(coords[:, 1].max() + 1)))
    for y in range(y_lo, y_hi + 1):
        xs = sorted(_ring_crossings(coords, y + 0.5))
        for a, b in zip(xs[0::2], xs[1::2]):
            # pixel centers with a <= x + 0.5 < b
            x_start = max(0, math.ceil(a - 0.5))
            x_end = min(width - 1, math.ceil(b - 0.5) - 1)
            if x_start <= x_end:
                bits[y, x_start : x_end + 1] = True
    return BinaryMask(bits)


def rasterize_polygons(rings: Sequence[Sequence[float]], height: int, width: int) -> BinaryMask:
    """Union of even-odd fills, one per ring (COCO multi-part segmentations)."""
    out = np.zeros((height, width), dtype=bool)
    for ring in rings:
        out |= rasterize_ring(ring, height, width).bits
    return BinaryMask(out)


def _validate_rings(segmentation) -> list[list[float]]:
    if not isinstance(segmentation, list) or not segmentation:
        raise ValueError("polygon segmentation must be a nonempty list of rings")
    rings = []
    for ring in segmentation:
        if not isinstance(ring, list) or len(ring) < 6 or len(ring) % 2 != 0:
            raise ValueError(f"ring needs an even coordinate count >= 6, got {len(ring)}")
        values = [float(v) for v in ring]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("ring contains non-finite coordinates")
        rings.append(values)
    return rings


def coco_annotation_mask(ann: dict, height: int, width: int) -> BinaryMask:
    """Decode one annotation's segmentation (polygons or uncompressed RLE)."""
    seg = ann.get("segmentation")
    if isinstance(seg, dict):
        counts = seg.get("counts")
        if not isinstance(counts, list):
            raise ValueError("compressed RLE strings are not supported")
        rle = rle_from_json_dict(seg)
        if (rle.height, rle.width) != (height, width):
            raise ValueError(f"RLE size {rle.height}x{rle.width} vs image {height}x{width}")
        return rle_decode(rle)
    return rasterize_polygons(_validate_rings(seg), height, width)


# ---------------------------------------------------------------------------
# COCO loader


def _coco_index(doc: dict) -> tuple[dict, dict, dict]:
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise DatasetError(f"annotation file has no {key!r} list")
    images = {}
    for entry in doc["images"]:
        try:
            images[int(entry["id"])] = {
                "file_name": str(entry["file_name"]),
                "width": int(entry["width"]),
                "height": int(entry["height"]),
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed image entry {entry!r}: {exc}") from exc
    categories = {}
    for entry in doc["categories"]:
        try:
            categories[int(entry["id"])] = str(entry["name"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed category entry {entry!r}: {exc}") from exc
    by_category: dict[int, list[dict]] = {}
    for ann in doc["annotations"]:
        try:
            by_category.setdefault(int(ann["category_id"]), []).append(ann)
        except (KeyError, TypeError, ValueError):
            # tolerated here, reported per-annotation during iteration
            by_category.setdefault(-1, []).append(ann)
    return images, categories, by_category


def read_coco_file(annotation_path: Union[str, Path]) -> dict:
    try:
        doc = json.loads(Path(annotation_path).read_text())
    except OSError as exc:
        raise DatasetError(f"cannot read {annotation_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{annotation_path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DatasetError(f"{annotation_path} is not a JSON object")
    return doc


def load_coco_dataset(
    annotation_path: Union[str, Path],
    images_dir: Union[str, Path],
    *,
    categories: Optional[Sequence[str]] = None,
    per_category_cap: Optional[int] = 20,
    seed: int = 0,
    dataset_name: Optional[str] = None,
    stats: Optional[LoaderStats] = None,
) -> Iterator[Sample]:
    """Samples from a COCO-style annotation file.

    Per category, at most `per_category_cap` images are kept via a seeded
    uniform draw (deterministic for a given seed); every usable annotation of
    that category on a kept image becomes a sample. Sample ids look like
    `<dataset>/<category>/<image stem>#<annotation id>`.
    """
    annotation_path = Path(annotation_path)
    images_dir = Path(images_dir)
    doc = read_coco_file(annotation_path)
    images, category_names, by_category = _coco_index(doc)
    stats = stats if stats is not None else LoaderStats()
    name = dataset_name or annotation_path.stem
    wanted = set(categories) if categories is not None else None

    for cat_id in sorted(by_category):
        cat_name = category_names.get(cat_id)
        if cat_id == -1 or cat_name is None:
            for ann in by_category[cat_id]:
                stats.skip(f"{name}: annotation {ann.get('id')!r} has an unknown category")
            continue
        if wanted is not None and cat_name not in wanted:
            continue
        anns = by_category[cat_id]
        image_ids = sorted({int(a["image_id"]) for a in anns if "image_id" in a})
        if per_category_cap is not None and len(image_ids) > per_category_cap:
            draw = SplitMix64(derive_seed(seed, "coco-cap", cat_id))
            picks = draw.indices_without_replacement(len(image_ids), per_category_cap)
            image_ids = sorted(image_ids[i] for i in picks)
        keep = set(image_ids)

        for ann in sorted(anns, key=lambda a: int(a.get("id", -1))):
            try:
                ann_id = int(ann["id"])
                image_id = int(ann["image_id"])
            except (KeyError, TypeError, ValueError):
                stats.skip(f"{name}/{cat_name}: annotation without usable ids: {ann!r:.80}")
                continue
            if image_id not in keep:
                continue
            entry = images.get(image_id)
            if entry is None:
                stats.skip(f"{name}/{cat_name}: annotation {ann_id} references "
                           f"missing image {image_id}")
                continue
            stem = Path(entry["file_name"]).stem
            sample_id = f"{name}/{cat_name}/{stem}#{ann_id}"
            image_path = images_dir / entry["file_name"]
            try:
                mask = coco_annotation_mask(ann, entry["height"], entry["width"])
                image = load_image_png(image_path)
                sample = Sample(sample_id, image, mask, cat_name, image_path=image_path)
            except (OSError, ValueError, PromptAugError) as exc:
                stats.skip(f"{sample_id}: {exc}")
                continue
            stats.loaded += 1
            yield sample


def decode_coco_masks(
    annotation_path: Union[str, Path],
    *,
    categories: Optional[Sequence[str]] = None,
    stats: Optional[LoaderStats] = None,
) -> Iterator[tuple[str, BinaryMask]]:
    """Decode every annotation's mask without touching image files.

    Yields (mask name, mask) pairs; names follow the sample id tail
    `<category>/<image stem>#<annotation id>`.
    """
    doc = read_coco_file(Path(annotation_path))
    images, category_names, by_category = _coco_index(doc)
    stats = stats if stats is not None else LoaderStats()
    wanted = set(categories) if categories is not None else None
    for cat_id in sorted(by_category):
        cat_name = category_names.get(cat_id)
        if cat_id == -1 or cat_name is None:
            for ann in by_category[cat_id]:
                stats.skip(f"annotation {ann.get('id')!r} has an unknown category")
            continue
        if wanted is not None and cat_name not in wanted:
            continue
        for ann in sorted(by_category[cat_id], key=lambda a: int(a.get("id", -1))):
            try:
                ann_id = int(ann["id"])
                entry = images[int(ann["image_id"])]
            except (KeyError, TypeError, ValueError):
                stats.skip(f"{cat_name}: annotation with unusable ids: {ann!r:.80}")
                continue
            stem = Path(entry["file_name"]).stem
            mask_name = f"{cat_name}/{stem}#{ann_id}"
            try:
                mask = coco_annotation_mask(ann, entry["height"], entry["width"])
            except (ValueError, PromptAugError) as exc:
                stats.skip(f"{mask_name}: {exc}")
                continue
            stats.loaded += 1
            yield mask_name, mask
