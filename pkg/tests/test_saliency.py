"""Saliency crop/detector/binarization tests.

Otsu is checked against an exhaustive threshold scan written independently
of the cumulative-moment implementation.
"""

import numpy as np
import pytest

from promptaug import (
    BinaryMask,
    Box,
    EmptyMask,
    Image,
    Point,
    ProviderUnavailable,
    SaliencyEmpty,
    SaliencyMap,
    binarize_saliency,
    crop_with_margin,
    sample_saliency_points,
    spectral_residual_saliency,
)
from promptaug.saliency import (
    OTSU_BINS,
    otsu_threshold,
    normalize_map,
    saliency_foreground,
    saliency_map_from_fixed_point,
    saliency_map_to_fixed_point,
)
from promptaug import SplitMix64


def otsu_oracle(values, bins=OTSU_BINS) -> int:
    """Exhaustive scan maximizing omega0*omega1*(mu0-mu1)^2, smallest k wins."""
    idx = [min(int(v * bins), bins - 1) for v in np.asarray(values).ravel()]
    n = len(idx)
    best_k, best_var = 0, -1.0
    for k in range(bins - 1):
        lo = [i for i in idx if i <= k]
        hi = [i for i in idx if i > k]
        if not lo or not hi:
            var = 0.0
        else:
            w0, w1 = len(lo) / n, len(hi) / n
            mu0, mu1 = sum(lo) / len(lo), sum(hi) / len(hi)
            var = w0 * w1 * (mu0 - mu1) ** 2
        if var > best_var:
            best_k, best_var = k, var
    return best_k


def dot_image(height=40, width=40, cy=26, cx=11) -> Image:
    arr = np.full((height, width), 20, dtype=np.uint8)
    arr[cy - 1 : cy + 2, cx - 1 : cx + 2] = 240
    return Image(arr)


def delta_detector(target: Point):
    """Fake detector lighting up exactly one crop pixel."""

    def detect(img: Image) -> SaliencyMap:
        values = np.zeros(img.pixels.shape[:2])
        values[target.y, target.x] = 1.0
        return SaliencyMap(values)

    return detect


class TestCrop:
    def test_margin_is_exactly_ten(self):
        img = Image(np.zeros((100, 120), dtype=np.uint8))
        bits = np.zeros((100, 120), dtype=bool)
        bits[40:50, 60:70] = True
        crop = crop_with_margin(img, BinaryMask(bits))
        assert crop.box == Box(50, 30, 79, 59)
        assert crop.image.height == 30 and crop.image.width == 30

    def test_margin_clamps_at_borders(self):
        img = Image(np.zeros((30, 30), dtype=np.uint8))
        bits = np.zeros((30, 30), dtype=bool)
        bits[0:5, 25:30] = True
        crop = crop_with_margin(img, BinaryMask(bits))
        assert crop.box == Box(15, 0, 29, 14)

    def test_crop_pixels_match_source(self):
        rng = SplitMix64(12)
        arr = np.zeros((40, 40), dtype=np.uint8)
        for y in range(40):
            for x in range(40):
                arr[y, x] = rng.below(256)
        img = Image(arr)
        bits = np.zeros((40, 40), dtype=bool)
        bits[18:22, 15:20] = True
        crop = crop_with_margin(img, BinaryMask(bits))
        b = crop.box
        assert np.array_equal(
            crop.image.pixels, arr[b.y_min : b.y_max + 1, b.x_min : b.x_max + 1]
        )

    def test_empty_mask_rejected(self):
        img = Image(np.zeros((10, 10), dtype=np.uint8))
        with pytest.raises(EmptyMask):
            crop_with_margin(img, BinaryMask.zeros(10, 10))

    def test_to_full_offsets_coordinates(self):
        img = Image(np.zeros((50, 50), dtype=np.uint8))
        bits = np.zeros((50, 50), dtype=bool)
        bits[30, 30] = True
        crop = crop_with_margin(img, BinaryMask(bits))
        assert crop.to_full(Point(0, 0)) == Point(20, 20)


class TestNormalize:
    def test_min_max_spans_unit_interval(self):
        out = normalize_map(np.array([[2.0, 4.0], [6.0, 10.0]]))
        assert out.min() == 0.0 and out.max() == 1.0
        assert out[0, 1] == pytest.approx(0.25)

    def test_near_constant_becomes_zero(self):
        out = normalize_map(np.full((3, 3), 0.7))
        assert not out.any()


class TestOtsu:
    def test_matches_exhaustive_oracle(self):
        rng = SplitMix64(77)
        for trial in range(25):
            n = 30 + rng.below(100)
            values = np.array([rng.next_float() for _ in range(n)])
            assert otsu_threshold(values) == otsu_oracle(values), trial

    def test_bimodal_plateau_takes_smallest_k(self):
        values = np.array([0.1] * 50 + [0.9] * 50)
        # 0.1 quantizes to bin 25; every k in [25, 229] separates the modes
        # equally well, so the tie resolves at 25
        assert otsu_threshold(values) == 25

    def test_quantized_levels_match_oracle(self):
        rng = SplitMix64(78)
        levels = [0.05, 0.2, 0.5, 0.92]
        for trial in range(10):
            values = np.array([levels[rng.below(4)] for _ in range(80)])
            assert otsu_threshold(values) == otsu_oracle(values), trial


class TestBinarize:
    def test_bimodal_keeps_bright_mode(self):
        values = np.zeros((4, 4))
        values[1:3, 1:3] = 0.9
        values[0, :] = 0.1
        fg = binarize_saliency(SaliencyMap(values))
        assert np.array_equal(fg.bits, values > 0.5)

    def test_zero_map_binarizes_to_empty(self):
        fg = binarize_saliency(SaliencyMap(np.zeros((5, 5))))
        assert fg.is_empty()

    def test_uniform_positive_map_keeps_everything(self):
        fg = binarize_saliency(SaliencyMap(np.full((3, 3), 0.5)))
        assert fg.area == 9


class TestSpectralResidual:
    def test_constant_image_yields_zero_map(self):
        sal = spectral_residual_saliency(Image(np.full((32, 32), 90, dtype=np.uint8)))
        assert not sal.values.any()

    def test_bright_dot_peaks_near_dot(self):
        sal = spectral_residual_saliency(dot_image())
        peak_y, peak_x = np.unravel_index(np.argmax(sal.values), sal.values.shape)
        assert abs(int(peak_y) - 26) <= 3 and abs(int(peak_x) - 11) <= 3

    def test_deterministic(self):
        img = dot_image()
        a = spectral_residual_saliency(img)
        b = spectral_residual_saliency(img)
        assert np.array_equal(a.values, b.values)

    def test_rgb_input_accepted(self):
        arr = np.full((24, 24, 3), 30, dtype=np.uint8)
        arr[10:13, 10:13] = (250, 240, 230)
        sal = spectral_residual_saliency(Image(arr))
        assert sal.values.shape == (24, 24)


class TestForegroundAndSampling:
    def mask_near(self, h, w, y, x):
        bits = np.zeros((h, w), dtype=bool)
        bits[y : y + 3, x : x + 3] = True
        return BinaryMask(bits)

    def test_points_are_full_coordinates(self):
        img = Image(np.zeros((60, 60), dtype=np.uint8))
        mask = self.mask_near(60, 60, 30, 30)
        pts = saliency_foreground(img, mask, detector=delta_detector(Point(3, 2)))
        # crop starts at (20, 20); crop pixel (x=3, y=2) is full (23, 22)
        assert pts == [Point(23, 22)]

    def test_wrong_detector_shape_rejected(self):
        img = Image(np.zeros((60, 60), dtype=np.uint8))
        mask = self.mask_near(60, 60, 30, 30)

        def bad(img_):
            return SaliencyMap(np.zeros((4, 4)))

        with pytest.raises(ProviderUnavailable):
            saliency_foreground(img, mask, detector=bad)

    def test_empty_detection_raises(self):
        img = Image(np.zeros((60, 60), dtype=np.uint8))
        mask = self.mask_near(60, 60, 10, 10)

        def silent(img_):
            return SaliencyMap(np.zeros(img_.pixels.shape[:2]))

        with pytest.raises(SaliencyEmpty):
            saliency_foreground(img, mask, detector=silent)

    def test_sample_points_deterministic_and_from_pool(self):
        img = dot_image(60, 60, cy=30, cx=30)
        mask = self.mask_near(60, 60, 28, 28)
        a = sample_saliency_points(img, mask, seed=5, k=2)
        b = sample_saliency_points(img, mask, seed=5, k=2)
        assert a == b and len(set(a)) == 2
        pool = set(saliency_foreground(img, mask))
        assert set(a) <= pool

    def test_oversized_k_raises(self):
        img = Image(np.zeros((60, 60), dtype=np.uint8))
        mask = self.mask_near(60, 60, 30, 30)
        with pytest.raises(SaliencyEmpty):
            sample_saliency_points(
                img, mask, seed=0, k=2, detector=delta_detector(Point(1, 1))
            )


class TestFixedPoint:
    def test_round_trip(self):
        rng = SplitMix64(90)
        values = np.array([[rng.next_float() for _ in range(6)] for _ in range(4)])
        values[0, 0], values[3, 5] = 0.0, 1.0  # pin the range so scale survives
        sal = SaliencyMap(values)
        wire = saliency_map_to_fixed_point(sal)
        back = saliency_map_from_fixed_point((4, 6), wire)
        assert np.allclose(back.values, values, atol=1.0 / 65535)

    def test_wire_values_are_u16_ints(self):
        sal = SaliencyMap(np.linspace(0, 1, 12).reshape(3, 4))
        wire = saliency_map_to_fixed_point(sal)
        assert all(isinstance(v, int) and 0 <= v <= 65535 for v in wire)

    def test_size_mismatch_rejected(self):
        with pytest.raises(ProviderUnavailable):
            saliency_map_from_fixed_point((2, 2), [0, 1, 2])

    def test_out_of_range_rejected(self):
        with pytest.raises(ProviderUnavailable):
            saliency_map_from_fixed_point((1, 2), [0, 70000])

    def test_renormalizes_partial_scale(self):
        back = saliency_map_from_fixed_point((1, 3), [100, 200, 300])
        assert back.values.min() == 0.0 and back.values.max() == 1.0
