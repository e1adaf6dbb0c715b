"""Saliency-guided point sampling.

The saliency strategy crops the image around the initial prediction (plus a
margin), runs a saliency detector on the crop, binarizes the saliency map,
and draws the extra click uniformly from the salient region. The in-tree
detector is the classic spectral-residual method; an external detector can be
plugged in as a callable (the harness wires the adapter protocol's saliency
call through here).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import cv2
import numpy as np

from .imgcore import (
    BinaryMask,
    Box,
    EmptyMask,
    Image,
    Point,
    PromptAugError,
    tight_bbox,
    to_grayscale,
)
from .rng import SplitMix64

CROP_MARGIN = 10          # pixels added on every side of the initial-mask bbox
SPECTRAL_WORK_SIZE = 64   # detector runs on a downscaled square
SPECTRAL_SIGMA = 2.5
SALIENCY_SCALE = 65535    # fixed-point scale used on the wire
OTSU_BINS = 256


class SaliencyEmpty(PromptAugError):
    """Binarized saliency produced no foreground to sample from."""


class ProviderUnavailable(PromptAugError):
    """An external saliency provider failed or returned garbage."""


@dataclass(frozen=True)
class SaliencyMap:
    """Per-pixel saliency in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError(f"saliency map must be 2-d, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("saliency map contains non-finite values")
        if vals.min() < 0.0 or vals.max() > 1.0:
            raise ValueError("saliency values must lie in [0, 1]")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CropRegion:
    """A sub-image together with where it came from."""

    image: Image
    box: Box

    def to_full(self, p: Point) -> Point:
        return Point(p.x + self.box.x_min, p.y + self.box.y_min)


def crop_with_margin(image: Image, mask: BinaryMask, margin: int = CROP_MARGIN) -> CropRegion:
    """Crop the image to the mask's bbox expanded by `margin`, clamped to bounds."""
    if image.pixels.shape[:2] != mask.bits.shape:
        raise ValueError("image and mask shapes differ")
    bbox = tight_bbox(mask)
    if bbox is None:
        raise EmptyMask("cannot crop around an empty mask")
    box = Box(
        max(0, bbox.x_min - margin),
        max(0, bbox.y_min - margin),
        bbox.x_max + margin,
        bbox.y_max + margin,
    ).clamped(image.width, image.height)
    return CropRegion(Image(image.pixels[box.y_min : box.y_max + 1, box.x_min : box.x_max + 1]), box)


def normalize_map(values: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a (near-)constant map collapses to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min())
    hi = float(values.max())
    if not np.isfinite(lo) or not np.isfinite(hi) or hi - lo <= 1e-12:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def spectral_residual_saliency(image: Image) -> SaliencyMap:
    """Spectral residual saliency (Hou & Zhang style).

    Grayscale -> 64x64 -> log-amplitude minus its 3x3 box smoothing ->
    inverse FFT keeping phase -> squared magnitude -> Gaussian blur ->
    upscale to the input size -> min-max normalize.
    """
    gray = to_grayscale(image).pixels.astype(np.float64)
    if gray.max() == gray.min():
        # a flat image has no salient structure; skip the transform, whose
        # numerical dust would otherwise get stretched to full range
        return SaliencyMap(np.zeros_like(gray))
    work = cv2.resize(gray, (SPECTRAL_WORK_SIZE, SPECTRAL_WORK_SIZE), interpolation=cv2.INTER_LINEAR)
    spectrum = np.fft.fft2(work)
    amplitude = np.abs(spectrum)
    phase = np.angle(spectrum)
    log_amp = np.log(amplitude + 1e-12)
    residual = log_amp - cv2.blur(log_amp, (3, 3))
    back = np.fft.ifft2(np.exp(residual) * np.exp(1j * phase))
    sal = np.abs(back) ** 2
    sal = cv2.GaussianBlur(sal, (0, 0), SPECTRAL_SIGMA)
    sal = cv2.resize(sal, (image.width, image.height), interpolation=cv2.INTER_LINEAR)
    return SaliencyMap(normalize_map(sal))


def otsu_threshold(values: np.ndarray, bins: int = OTSU_BINS) -> int:
    """Otsu's threshold index over quantized [0, 1] values.

    Returns k in [0, bins-2]; foreground is every value whose bin index
    exceeds k. Ties resolve to the smallest k.
    """
    idx = np.minimum((np.asarray(values) * bins).astype(np.int64), bins - 1)
    hist = np.bincount(idx.ravel(), minlength=bins).astype(np.float64)
    total = hist.sum()
    probs = hist / total
    omega = np.cumsum(probs)                      # class-0 mass for threshold k
    mu = np.cumsum(probs * np.arange(bins))       # class-0 first moment
    mu_total = mu[-1]
    omega0 = omega[:-1]
    omega1 = 1.0 - omega0
    valid = (omega0 > 0) & (omega1 > 0)
    between = np.zeros(bins - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        diff = mu_total * omega0 - mu[:-1]
        between[valid] = (diff[valid] ** 2) / (omega0[valid] * omega1[valid])
    return int(np.argmax(between))


def binarize_saliency(sal: SaliencyMap) -> BinaryMask:
    """Otsu binarization; falls back to the top percentile when Otsu keeps nothing."""
    idx = np.minimum((sal.values * OTSU_BINS).astype(np.int64), OTSU_BINS - 1)
    fg = idx > otsu_threshold(sal.values)
    if not fg.any():
        thr = np.quantile(sal.values, 0.99)
        fg = (sal.values >= thr) & (sal.values > 0)
    return BinaryMask(fg)


Detector = Callable[[Image], SaliencyMap]


def saliency_foreground(
    image: Image,
    initial_mask: BinaryMask,
    *,
    margin: int = CROP_MARGIN,
    detector: Optional[Detector] = None,
) -> list[Point]:
    """Salient pixels near the initial prediction, in full-image coordinates,
    row-major. Raises SaliencyEmpty when the detector finds nothing."""
    crop = crop_with_margin(image, initial_mask, margin)
    detect = detector or spectral_residual_saliency
    sal = detect(crop.image)
    if sal.values.shape != crop.image.pixels.shape[:2]:
        raise ProviderUnavailable(
            f"detector returned shape {sal.values.shape} for a "
            f"{crop.image.height}x{crop.image.width} crop"
        )
    fg = binarize_saliency(sal)
    coords = np.argwhere(fg.bits)
    if coords.shape[0] == 0:
        raise SaliencyEmpty("saliency map binarized to an empty region")
    return [crop.to_full(Point(int(x), int(y))) for y, x in coords]


def sample_saliency_points(
    image: Image,
    initial_mask: BinaryMask,
    seed: int,
    k: int = 1,
    *,
    margin: int = CROP_MARGIN,
    detector: Optional[Detector] = None,
) -> list[Point]:
    """Draw k distinct salient points near the initial prediction."""
    pool = saliency_foreground(image, initial_mask, margin=margin, detector=detector)
    if len(pool) < k:
        raise SaliencyEmpty(f"salient region has {len(pool)} pixels, need {k}")
    picks = SplitMix64(seed).indices_without_replacement(len(pool), k)
    return [pool[i] for i in picks]


def saliency_map_from_fixed_point(size: tuple[int, int], values: list[int]) -> SaliencyMap:
    """Decode the wire representation (u16 fixed point, row-major) and
    renormalize, since a provider's scale may not span [0, 1]."""
    h, w = int(size[0]), int(size[1])
    arr = np.asarray(values, dtype=np.float64)
    if h < 1 or w < 1 or arr.size != h * w:
        raise ProviderUnavailable(f"saliency payload size mismatch: {arr.size} values for {h}x{w}")
    if arr.size and (arr.min() < 0 or arr.max() > SALIENCY_SCALE):
        raise ProviderUnavailable("saliency values outside fixed-point range")
    return SaliencyMap(normalize_map(arr.reshape((h, w)) / SALIENCY_SCALE))


def saliency_map_to_fixed_point(sal: SaliencyMap) -> list[int]:
    return [int(v) for v in np.round(sal.values.ravel() * SALIENCY_SCALE).astype(np.int64)]
