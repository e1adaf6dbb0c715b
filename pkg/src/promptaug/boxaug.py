"""Box prompt derivation and the box augmentation schemes.

Two primitives:

  * outer_box: the tight bounding box of a mask,
  * inner_box: a randomly-centered box grown side by side until every side
    hits the mask boundary, so the box lies entirely inside the mask. This
    mimics a user's rough box around the object's interior.

Five schemes chain those through the segmenter. Single-pass schemes prompt
once from ground truth; two-pass schemes prompt, rebox the predicted mask,
and prompt again. The last scheme keeps the initial click alongside the
derived box in the second call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .imgcore import BinaryMask, Box, EmptyMask, Image, PointPrompt, tight_bbox
from .rng import SplitMix64
from .sampling import uniform_mask_point
from .segmenter import SegmentationResult, Segmenter

EMPTY_INTERMEDIATE = "EmptyIntermediate"


class BoxScheme(enum.Enum):
    INNER_OF_GT = "inner_of_gt"
    OUTER_OF_GT = "outer_of_gt"
    INNER_OF_INITIAL_BOX = "inner_of_initial_box"
    OUTER_OF_INITIAL_BOX = "outer_of_initial_box"
    OUTER_OF_INITIAL_POINT = "outer_of_initial_point"


def outer_box(mask: BinaryMask) -> Box:
    """Tight bounding box of the mask's foreground."""
    box = tight_bbox(mask)
    if box is None:
        raise EmptyMask("cannot box an empty mask")
    return box


def inner_box(mask: BinaryMask, seed: int) -> Box:
    """Largest per-side box inside the mask around a random foreground center.

    Starting from the 1x1 box at a uniformly drawn foreground pixel, sides
    grow one pixel at a time in the fixed order left, top, right, bottom.
    A side only grows while the uncovered strip is entirely foreground; once
    it fails it stays frozen (later strips are supersets, so retrying cannot
    succeed). Every returned box is therefore all-foreground and maximal in
    each direction separately.
    """
    center = uniform_mask_point(mask, seed)
    bits = mask.bits
    h, w = bits.shape
    x0 = x1 = center.x
    y0 = y1 = center.y
    frozen = [False, False, False, False]  # left, top, right, bottom
    while not all(frozen):
        if not frozen[0]:
            if x0 > 0 and bits[y0 : y1 + 1, x0 - 1].all():
                x0 -= 1
            else:
                frozen[0] = True
        if not frozen[1]:
            if y0 > 0 and bits[y0 - 1, x0 : x1 + 1].all():
                y0 -= 1
            else:
                frozen[1] = True
        if not frozen[2]:
            if x1 < w - 1 and bits[y0 : y1 + 1, x1 + 1].all():
                x1 += 1
            else:
                frozen[2] = True
        if not frozen[3]:
            if y1 < h - 1 and bits[y1 + 1, x0 : x1 + 1].all():
                y1 += 1
            else:
                frozen[3] = True
    return Box(x0, y0, x1, y1)


@dataclass
class BoxChain:
    """Everything a box scheme produced, in call order."""

    scheme: BoxScheme
    boxes: list[Box] = field(default_factory=list)
    results: list[SegmentationResult] = field(default_factory=list)
    initial_point: Optional[PointPrompt] = None
    flags: list[str] = field(default_factory=list)

    @property
    def initial_mask(self) -> BinaryMask:
        return self.results[0].mask

    @property
    def final_mask(self) -> BinaryMask:
        if EMPTY_INTERMEDIATE in self.flags:
            first = self.results[0].mask
            return BinaryMask.zeros(first.height, first.width)
        return self.results[-1].mask


def run_box_scheme(
    scheme: BoxScheme,
    image: Image,
    gt_mask: BinaryMask,
    segmenter: Segmenter,
    seed: int,
) -> BoxChain:
    """Run one scheme end to end.

    Two sub-seeds are drawn up front from `seed` (first pass, second pass)
    so chains of different lengths stay comparable under a shared seed.
    """
    stream = SplitMix64(seed)
    seed_first = stream.next_u64()
    seed_second = stream.next_u64()
    chain = BoxChain(scheme)

    if scheme is BoxScheme.OUTER_OF_INITIAL_POINT:
        p0 = PointPrompt(uniform_mask_point(gt_mask, seed_first))
        chain.initial_point = p0
        first = segmenter.segment(image, points=[p0])
    else:
        if scheme is BoxScheme.OUTER_OF_GT:
            first_box = outer_box(gt_mask)
        else:
            first_box = inner_box(gt_mask, seed_first)
        chain.boxes.append(first_box)
        first = segmenter.segment(image, box=first_box)
    chain.results.append(first)

    if scheme in (BoxScheme.INNER_OF_GT, BoxScheme.OUTER_OF_GT):
        return chain

    if first.mask.is_empty():
        chain.flags.append(EMPTY_INTERMEDIATE)
        return chain

    if scheme is BoxScheme.INNER_OF_INITIAL_BOX:
        second_box = inner_box(first.mask, seed_second)
        second = segmenter.segment(image, box=second_box)
    elif scheme is BoxScheme.OUTER_OF_INITIAL_BOX:
        second_box = outer_box(first.mask)
        second = segmenter.segment(image, box=second_box)
    else:  # OUTER_OF_INITIAL_POINT: keep the click, add the derived box
        second_box = outer_box(first.mask)
        second = segmenter.segment(image, points=[chain.initial_point], box=second_box)
    chain.boxes.append(second_box)
    chain.results.append(second)
    return chain
