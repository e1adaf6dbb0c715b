"""Point prompt sampling strategies.

Given an image, an initial click p0, and a candidate mask (the segmenter's
initial prediction, or the ground truth when measuring the upper bound), each
strategy picks one or more additional foreground clicks:

  * random        uniform over the candidate pixels
  * max_entropy   the candidate maximizing patch-entropy gain over p0
  * max_distance  the candidate farthest from p0 (optionally nearest)
  * saliency      uniform over a salient-region pool, see saliency.py

Candidates are enumerated in row-major order and all ties break toward the
lowest row-major index, so results are deterministic given a seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .imgcore import BinaryMask, Image, Point, PromptAugError, to_grayscale
from .rng import SplitMix64

PATCH_RADIUS = 4  # 9x9 window
ENTROPY_BINS = 256


class EmptyCandidates(PromptAugError):
    """The candidate mask has no usable pixel."""


class InsufficientCandidates(PromptAugError):
    """Fewer distinct candidates than requested points."""


class StrategyKind(enum.Enum):
    RANDOM = "random"
    MAX_ENTROPY = "max_entropy"
    MAX_DISTANCE = "max_distance"
    SALIENCY = "saliency"


@dataclass(frozen=True)
class CandidateSet:
    """Foreground pixels of a source mask, minus the initial click.

    `coords` is an (n, 2) int array of (y, x) rows in row-major scan order.
    """

    coords: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] == 0:
            raise EmptyCandidates("candidate set must be a nonempty (n, 2) array")
        coords = coords.copy()
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def point_at(self, i: int) -> Point:
        y, x = self.coords[i]
        return Point(int(x), int(y))

    def points(self) -> list[Point]:
        return [Point(int(x), int(y)) for y, x in self.coords]


def build_candidates(mask: BinaryMask, exclude: Optional[Point] = None) -> CandidateSet:
    """Candidate pixels from a mask in row-major order, excluding one click."""
    coords = np.argwhere(mask.bits)  # (y, x) rows, already row-major
    if exclude is not None:
        keep = ~((coords[:, 0] == exclude.y) & (coords[:, 1] == exclude.x))
        coords = coords[keep]
    if coords.shape[0] == 0:
        raise EmptyCandidates("no candidate pixels after exclusion")
    return CandidateSet(coords, mask.height, mask.width)


@dataclass(frozen=True)
class PatchHistogram:
    center: Point
    bin_counts: np.ndarray
    valid_count: int


def _window(gray: Image, p: Point) -> np.ndarray:
    if gray.channels != 1:
        raise ValueError("expected a grayscale image")
    if not gray.contains(p):
        raise ValueError(f"point {p} outside image {gray.width}x{gray.height}")
    y0 = max(0, p.y - PATCH_RADIUS)
    x0 = max(0, p.x - PATCH_RADIUS)
    return gray.pixels[y0 : p.y + PATCH_RADIUS + 1, x0 : p.x + PATCH_RADIUS + 1]


def patch_histogram(gray: Image, p: Point) -> PatchHistogram:
    """Intensity histogram of the 9x9 window around p, truncated at borders."""
    window = _window(gray, p)
    counts = np.bincount(window.ravel(), minlength=ENTROPY_BINS)
    return PatchHistogram(p, counts, int(window.size))


def patch_entropy(gray: Image, p: Point) -> float:
    """Shannon entropy (bits) of the intensity distribution around p.

    Counts are sorted before summation so that windows with the same count
    partition (equal entropy in exact arithmetic) produce bitwise-identical
    floats; argmax tie-breaking then cannot depend on intensity labels.
    """
    window = _window(gray, p)
    counts = np.bincount(window.ravel())
    positive = counts[counts > 0]
    positive.sort()
    probs = positive / window.size
    return float(-(probs * np.log2(probs)).sum())


def _entropies(gray: Image, coords: np.ndarray) -> np.ndarray:
    return np.array([patch_entropy(gray, Point(int(x), int(y))) for y, x in coords])


def _squared_distances(coords: np.ndarray, p0: Point) -> np.ndarray:
    dy = coords[:, 0] - p0.y
    dx = coords[:, 1] - p0.x
    return dx * dx + dy * dy


def sample_random(candidates: CandidateSet, seed: int) -> Point:
    """Uniform draw from the candidate set."""
    return candidates.point_at(SplitMix64(seed).below(len(candidates)))


def sample_max_entropy(image: Image, candidates: CandidateSet, p0: Point) -> Point:
    """Candidate with the largest patch-entropy gain H(p) - H(p0).

    H(p0) is constant over candidates, so the argmax equals the argmax of
    H(p) alone; it is still computed so callers can inspect the gain.
    """
    gray = to_grayscale(image)
    gains = _entropies(gray, candidates.coords) - patch_entropy(gray, p0)
    return candidates.point_at(int(np.argmax(gains)))


def sample_max_distance(candidates: CandidateSet, p0: Point, mode: str = "max") -> Point:
    """Candidate at extremal Euclidean distance from p0.

    Distances compare by their integer squares, so ties are exact.
    """
    d2 = _squared_distances(candidates.coords, p0)
    if mode == "max":
        return candidates.point_at(int(np.argmax(d2)))
    if mode == "min":
        return candidates.point_at(int(np.argmin(d2)))
    raise ValueError(f"unknown distance mode {mode!r}")


def uniform_mask_point(mask: BinaryMask, seed: int) -> Point:
    """Uniform seeded draw from a mask's foreground."""
    try:
        candidates = build_candidates(mask)
    except EmptyCandidates as exc:
        raise EmptyCandidates("mask has no foreground to draw from") from exc
    return sample_random(candidates, seed)


def centroid_point(mask: BinaryMask) -> Point:
    """Foreground pixel nearest the foreground centroid (row-major ties)."""
    candidates = build_candidates(mask)
    cy, cx = candidates.coords.mean(axis=0)
    dy = candidates.coords[:, 0] - cy
    dx = candidates.coords[:, 1] - cx
    return candidates.point_at(int(np.argmin(dx * dx + dy * dy)))


def _ranked_indices(values: np.ndarray, descending: bool) -> np.ndarray:
    """Stable sort indices; equal values keep row-major candidate order."""
    keys = -values if descending else values
    return np.argsort(keys, kind="stable")


def sample_top_k(
    strategy: StrategyKind,
    k: int,
    *,
    candidates: Optional[CandidateSet] = None,
    p0: Optional[Point] = None,
    image: Optional[Image] = None,
    seed: Optional[int] = None,
    distance_mode: str = "max",
    saliency_pool: Optional[Sequence[Point]] = None,
) -> list[Point]:
    """Top-k points for a strategy, in rank order.

    Random and saliency draw k distinct points; max_entropy and max_distance
    return the k best-scoring candidates. For k == 1 this agrees with the
    single-point samplers above.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if strategy is StrategyKind.SALIENCY:
        if saliency_pool is None or seed is None:
            raise ValueError("saliency sampling needs a pool and a seed")
        if len(saliency_pool) < k:
            raise InsufficientCandidates(
                f"saliency pool has {len(saliency_pool)} points, need {k}"
            )
        picks = SplitMix64(seed).indices_without_replacement(len(saliency_pool), k)
        return [saliency_pool[i] for i in picks]

    if candidates is None:
        raise ValueError("strategy needs a candidate set")
    if len(candidates) < k:
        raise InsufficientCandidates(f"{len(candidates)} candidates, need {k}")

    if strategy is StrategyKind.RANDOM:
        if seed is None:
            raise ValueError("random sampling needs a seed")
        picks = SplitMix64(seed).indices_without_replacement(len(candidates), k)
        return [candidates.point_at(i) for i in picks]

    if p0 is None:
        raise ValueError(f"{strategy.value} needs the initial point")

    if strategy is StrategyKind.MAX_ENTROPY:
        if image is None:
            raise ValueError("max_entropy needs the image")
        gray = to_grayscale(image)
        gains = _entropies(gray, candidates.coords) - patch_entropy(gray, p0)
        order = _ranked_indices(gains, descending=True)
    elif strategy is StrategyKind.MAX_DISTANCE:
        d2 = _squared_distances(candidates.coords, p0)
        order = _ranked_indices(d2, descending=(distance_mode == "max"))
        if distance_mode not in ("max", "min"):
            raise ValueError(f"unknown distance mode {distance_mode!r}")
    else:
        raise ValueError(f"unhandled strategy {strategy!r}")

    return [candidates.point_at(int(i)) for i in order[:k]]
