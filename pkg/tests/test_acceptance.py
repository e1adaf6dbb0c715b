"""Release acceptance suite.

One test per release criterion, with the tolerance pinned inline, so that
`pytest -v tests/test_acceptance.py` prints a pass/fail line per criterion.
Expected values are re-derived here with deliberately independent code:
plain-Python counting, exhaustive scans, and parity ray casts instead of
the library's vectorized paths. Do not "simplify" a check by routing both
sides through the same helper.
"""

import json
import math
import shlex
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from promptaug import (
    BinaryMask,
    Box,
    Image,
    MockDiskAroundSeeds,
    Point,
    PointPrompt,
    SplitMix64,
    StrategyKind,
    TwoBlobSpec,
    build_candidates,
    centroid_point,
    config_from_dict,
    dice,
    inner_box,
    outer_box,
    patch_entropy,
    rasterize_ring,
    rle_decode,
    rle_encode,
    run_experiment,
    sample_max_distance,
    sample_max_entropy,
    sample_saliency_points,
    sample_top_k,
    save_image_png,
    save_mask_png,
    spectral_residual_saliency,
)
from promptaug.cli import cli_main
from promptaug.dataset import coco_annotation_mask
from promptaug.harness import summary_markdown_text
from promptaug.saliency import crop_with_margin

from conftest import gradient_image, random_blob_mask, random_mask

NODE_ADAPTER = Path(__file__).resolve().parents[1] / "adapter" / "dist" / "main.js"


# ---------------------------------------------------------------------------
# Counting-based entropy oracle (shared by criteria 1 and 2)

_LN2 = math.log(2.0)
# -(c/n) * log2(c/n) for a bin of count c in a window of n pixels; memoized
# so the oracle stays affordable at full-image scale. The table is built from
# the same scalar expression a per-pixel loop would evaluate.
_ENTROPY_TERM = [[0.0] * (n + 1) for n in range(82)]
for _n in range(1, 82):
    for _c in range(1, _n + 1):
        _p = _c / _n
        _ENTROPY_TERM[_n][_c] = -_p * (math.log(_p) / _LN2)


def oracle_entropy(arr: np.ndarray, y: int, x: int) -> float:
    """Patch entropy by counting, summed over sorted bin counts."""
    h, w = arr.shape
    vals = arr[max(0, y - 4):min(h, y + 5), max(0, x - 4):min(w, x + 5)].ravel().tolist()
    term = _ENTROPY_TERM[len(vals)]
    total = 0.0
    for count in sorted(Counter(vals).values()):
        total += term[count]
    return total


# ---------------------------------------------------------------------------
# Criterion 1: entropy agreement at every pixel, bounded runtime

def test_entropy_matches_counting_oracle_on_200_images():
    started = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        image = gradient_image(32, 32, seed)
        arr = image.pixels
        for y in range(32):
            for x in range(32):
                diff = abs(patch_entropy(image, Point(x, y)) - oracle_entropy(arr, y, x))
                if diff > worst:
                    worst = diff
    elapsed = time.perf_counter() - started
    assert worst <= 1e-12, f"worst entropy deviation {worst:.3e} bits"
    assert elapsed < 10.0, f"entropy check took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# Criterion 2: argmax strategies against exhaustive oracles

def _instance(i: int):
    rng = SplitMix64(9000 + i)
    h = 8 + rng.below(57)
    w = 8 + rng.below(57)
    if i % 5 == 1:
        h |= 1  # a center pixel must exist, see below
        w |= 1

    if i % 4 == 0:
        image = Image(np.full((h, w), 77, dtype=np.uint8))  # every window ties
    elif i % 2 == 0:
        bits = np.array(
            [[rng.below(2) for _ in range(w)] for _ in range(h)], dtype=np.uint8
        )
        image = Image(bits * 128)  # two levels, frequent count-partition ties
    else:
        image = gradient_image(h, w, 9000 + i)

    mask = random_mask(rng, h, w, density=0.12)
    if i % 5 == 1:
        # point-symmetric mask, click at its center: the most distant pixel
        # and its mirror twin tie exactly, exercising the row-major rule
        bits = mask.bits | mask.bits[::-1, ::-1]
        bits[h // 2, w // 2] = True
        mask = BinaryMask(bits)
        p0 = Point(w // 2, h // 2)
    else:
        coords = [(int(y), int(x)) for y, x in np.argwhere(mask.bits)]
        if len(coords) < 2:
            mask = random_mask(rng, h, w, density=0.5)
            coords = [(int(y), int(x)) for y, x in np.argwhere(mask.bits)]
        p0 = Point(coords[rng.below(len(coords))][1], coords[rng.below(len(coords))][0])

    coords = [(int(y), int(x)) for y, x in np.argwhere(mask.bits)]
    kept = [(y, x) for y, x in coords if (y, x) != (p0.y, p0.x)]
    return image, mask, p0, kept


def test_argmax_strategies_match_exhaustive_oracles():
    entropy_ties = distance_ties = 0
    for i in range(100):
        image, mask, p0, kept = _instance(i)
        candidates = build_candidates(mask, exclude=p0)

        gray = image.pixels if image.channels == 1 else None
        assert gray is not None
        base = oracle_entropy(gray, p0.y, p0.x)
        gains = [oracle_entropy(gray, y, x) - base for y, x in kept]
        top = max(gains)
        want = Point(kept[gains.index(top)][1], kept[gains.index(top)][0])
        if gains.count(top) > 1:
            entropy_ties += 1
        assert sample_max_entropy(image, candidates, p0) == want, f"instance {i}"

        d2s = [(y - p0.y) ** 2 + (x - p0.x) ** 2 for y, x in kept]
        top = max(d2s)
        want = Point(kept[d2s.index(top)][1], kept[d2s.index(top)][0])
        if d2s.count(top) > 1:
            distance_ties += 1
        assert sample_max_distance(candidates, p0) == want, f"instance {i}"

    # the tie-break rule must actually have been exercised
    assert entropy_ties >= 10 and distance_ties >= 10, (entropy_ties, distance_ties)


# ---------------------------------------------------------------------------
# Criterion 3: Dice against brute force, RLE round trips

def test_dice_matches_bruteforce_and_rle_roundtrips_exactly():
    rng = SplitMix64(31)
    for i in range(500):
        h = 1 + rng.below(20)
        w = 1 + rng.below(20)
        density = (0.0, 0.15, 0.5, 0.9, 1.0)[rng.below(5)]
        a = random_mask(rng, h, w, density)
        b = random_mask(rng, h, w, density)
        inter = a_sum = b_sum = 0
        for y in range(h):
            for x in range(w):
                a_sum += int(a.bits[y, x])
                b_sum += int(b.bits[y, x])
                inter += int(a.bits[y, x] and b.bits[y, x])
        want = 1.0 if a_sum + b_sum == 0 else 2.0 * inter / (a_sum + b_sum)
        assert dice(a, b) == want, f"pair {i}"

    rng = SplitMix64(32)
    for i in range(1000):
        h = 1 + rng.below(32)
        w = 1 + rng.below(32)
        mask = random_mask(rng, h, w, density=(0.0, 0.3, 0.7, 1.0)[rng.below(4)])
        back = rle_decode(rle_encode(mask))
        assert np.array_equal(back.bits, mask.bits), f"mask {i}"


# ---------------------------------------------------------------------------
# Criterion 4: box extractors on random blob masks

def test_box_extractors_hold_invariants_on_random_blobs():
    rng = SplitMix64(47)
    for i in range(200):
        h = 12 + rng.below(40)
        w = 12 + rng.below(40)
        mask = random_blob_mask(rng, h, w)
        bits = mask.bits
        coords = np.argwhere(bits)

        outer = outer_box(mask)
        assert outer.x_min == coords[:, 1].min() and outer.x_max == coords[:, 1].max()
        assert outer.y_min == coords[:, 0].min() and outer.y_max == coords[:, 0].max()
        sub = bits[outer.y_min:outer.y_max + 1, outer.x_min:outer.x_max + 1]
        assert sub[0, :].any() and sub[-1, :].any()
        assert sub[:, 0].any() and sub[:, -1].any()

        inner = inner_box(mask, seed=1000 + i)
        core = bits[inner.y_min:inner.y_max + 1, inner.x_min:inner.x_max + 1]
        assert core.all(), f"blob {i}: inner box covers background"
        # per-side maximality: growing any one side with the rest frozen
        # must include background or leave the image
        strips = {
            "left": bits[inner.y_min:inner.y_max + 1, inner.x_min - 1:inner.x_min]
            if inner.x_min > 0 else None,
            "right": bits[inner.y_min:inner.y_max + 1, inner.x_max + 1:inner.x_max + 2]
            if inner.x_max < w - 1 else None,
            "top": bits[inner.y_min - 1:inner.y_min, inner.x_min:inner.x_max + 1]
            if inner.y_min > 0 else None,
            "bottom": bits[inner.y_max + 1:inner.y_max + 2, inner.x_min:inner.x_max + 1]
            if inner.y_max < h - 1 else None,
        }
        for side, strip in strips.items():
            if strip is not None:
                assert not strip.all(), f"blob {i}: inner box can still grow {side}"


# ---------------------------------------------------------------------------
# Criteria 5 and 6: the two-blob benchmark

@pytest.fixture(scope="module")
def benchmark():
    cfg = config_from_dict({
        "dataset": {"kind": "two_blob", "count": 200, "seed": 7},
        "segmenter": {"kind": "disk", "radius": 7},
        "strategies": ["max_distance"],
        "point_source": "gt",
        "initial_point_rule": "centroid",
        "extra_points": [1, 2, 4],
        "repeats": 3,
        "base_seed": 0,
    })
    started = time.perf_counter()
    result = run_experiment(cfg)
    return result, time.perf_counter() - started


def test_augmentation_gain_on_two_blob_benchmark(benchmark):
    result, elapsed = benchmark
    # the premise of the fixture: a click reaches less than one blob, and the
    # second blob sits further away than the segmenter can cover
    assert result.config.segmenter["radius"] < TwoBlobSpec().min_spacing
    assert not result.failures

    records = [r for r in result.records if r.strategy == "gt_max_distance"]
    assert records
    one_extra = [r for r in records if r.total_points == 2]
    gain = (sum(r.dice_augmented for r in one_extra) / len(one_extra)
            - sum(r.dice_initial for r in one_extra) / len(one_extra))
    assert gain >= 0.10, f"mean gain {gain:+.4f}"
    worst = min(r.dice_augmented - r.dice_initial for r in records)
    assert worst >= 0.0, f"a case got worse by {worst:+.4f}"
    assert elapsed < 30.0, f"benchmark took {elapsed:.1f}s"


def test_mean_dice_monotone_in_total_points(benchmark):
    result, _ = benchmark
    records = [r for r in result.records if r.strategy == "gt_max_distance"]
    by_points = {}
    for r in records:
        by_points.setdefault(r.total_points, []).append(r.dice_augmented)
    assert sorted(by_points) == [2, 3, 5]
    means = {k: sum(v) / len(v) for k, v in by_points.items()}
    assert means[2] <= means[3] <= means[5], means

    summary = summary_markdown_text(result)
    for points in (2, 3, 5):
        assert f"| all | {points} |" in summary, f"no pooled row for {points} points"


# ---------------------------------------------------------------------------
# Criterion 7: stability mode on a rotation-symmetric fixture

def test_stability_top3_zero_spread_and_oracle_ranking(tmp_path):
    bits = np.zeros((9, 9), dtype=bool)
    bits[4, :] = True
    bits[:, 4] = True
    gt = BinaryMask(bits)
    image = Image(np.full((9, 9), 120, dtype=np.uint8))

    p0 = centroid_point(gt)
    assert p0 == Point(4, 4)
    segmenter = MockDiskAroundSeeds(4)
    initial = segmenter.segment(image, points=[PointPrompt(p0)]).mask
    candidates = build_candidates(initial, exclude=p0)
    picked = sample_top_k(StrategyKind.MAX_DISTANCE, 3, candidates=candidates, p0=p0)

    kept = [(int(y), int(x)) for y, x in np.argwhere(initial.bits) if (y, x) != (4, 4)]
    d2s = [(y - 4) ** 2 + (x - 4) ** 2 for y, x in kept]
    order = sorted(range(len(kept)), key=lambda i: (-d2s[i], i))
    want = [Point(kept[i][1], kept[i][0]) for i in order[:3]]
    assert picked == want
    # the disk rim meets the arms at four axis pixels; row-major keeps three
    assert picked == [Point(4, 0), Point(0, 4), Point(8, 4)]

    images_dir = tmp_path / "images"
    masks_dir = tmp_path / "masks"
    images_dir.mkdir()
    masks_dir.mkdir()
    save_image_png(image, images_dir / "plus.png")
    save_mask_png(gt, masks_dir / "plus.png")
    result = run_experiment(config_from_dict({
        "dataset": {"kind": "dir", "images_dir": str(images_dir),
                    "masks_dir": str(masks_dir), "name": "fix"},
        "segmenter": {"kind": "disk", "radius": 4},
        "strategies": ["max_distance"],
        "initial_point_rule": "centroid",
        "stability_top3": True,
        "extra_points": [1],
        "repeats": 1,
        "base_seed": 21,
    }))
    assert not result.failures
    ranked = [r for r in result.records if r.rank > 0 and r.strategy == "max_distance"]
    assert [r.rank for r in ranked] == [1, 2, 3]
    spread = max(r.dice_augmented for r in ranked) - min(r.dice_augmented for r in ranked)
    assert spread == 0.0, f"dice spread {spread} across congruent picks"


# ---------------------------------------------------------------------------
# Criterion 8: saliency pipeline on a bright-dot fixture

def test_saliency_dot_fixture_crop_peak_and_determinism():
    pixels = np.zeros((64, 64), dtype=np.uint8)
    pixels[41, 19] = 240  # single bright dot on black
    image = Image(pixels)

    sal = spectral_residual_saliency(image)
    py, px = np.unravel_index(int(np.argmax(sal.values)), sal.values.shape)
    assert (py - 41) ** 2 + (px - 19) ** 2 <= 9, (
        f"saliency peak ({px}, {py}) not within 3px of the dot (19, 41)"
    )

    bits = np.zeros((64, 64), dtype=bool)
    bits[34:43, 13:22] = True  # initial guess overlapping the dot
    initial = BinaryMask(bits)
    crop = crop_with_margin(image, initial)
    assert crop.box == Box(3, 24, 31, 52)  # margin of exactly 10 on each side

    corner_bits = np.zeros((64, 64), dtype=bool)
    corner_bits[0:4, 0:4] = True
    assert crop_with_margin(image, BinaryMask(corner_bits)).box == Box(0, 0, 13, 13)

    first = sample_saliency_points(image, initial, seed=77, k=1)
    again = sample_saliency_points(image, initial, seed=77, k=1)
    assert first == again
    point = first[0]
    assert crop.box.x_min <= point.x <= crop.box.x_max
    assert crop.box.y_min <= point.y <= crop.box.y_max


# ---------------------------------------------------------------------------
# Criterion 9: byte-identical reports across repeat runs

def test_repeated_runs_are_byte_identical(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "dataset": {"kind": "two_blob", "count": 6, "seed": 11},
        "segmenter": {"kind": "region_grow", "radius": 9, "tolerance": 12},
        "strategies": ["random", "max_entropy", "max_distance", "saliency"],
        "extra_points": [1, 2],
        "repeats": 2,
        "base_seed": 5,
        "stability_top3": True,
    }))
    outputs = []
    for sub in ("first", "second"):
        out = tmp_path / sub
        code = cli_main(["run", "--config", str(config_path), "--output-dir", str(out)])
        assert code == 0
        outputs.append(out)
    for name in ("records.csv", "summary.md"):
        first = (outputs[0] / name).read_bytes()
        second = (outputs[1] / name).read_bytes()
        assert first == second, f"{name} differs between identical runs"
    assert (outputs[0] / "records.csv").read_bytes().count(b"\n") > 1


# ---------------------------------------------------------------------------
# Criterion 10: polygon rasterization and RLE ingestion

def _ray_cast(ring: list, px: float, py: float) -> bool:
    """Crossing-number parity at a pixel center, half-open at vertices."""
    inside = False
    n = len(ring) // 2
    for i in range(n):
        x1, y1 = ring[2 * i], ring[2 * i + 1]
        j = (i + 1) % n
        x2, y2 = ring[2 * j], ring[2 * j + 1]
        if (y1 <= py < y2) or (y2 <= py < y1):
            crossing = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < crossing:
                inside = not inside
    return inside


def _star_ring(rng: SplitMix64, h: int, w: int) -> list:
    cx = 2.0 + rng.next_float() * (w - 5.0)
    cy = 2.0 + rng.next_float() * (h - 5.0)
    reach = min(cx, cy, w - 1.0 - cx, h - 1.0 - cy)
    vertices = 3 + rng.below(10)
    angles = sorted(rng.next_float() * 2.0 * math.pi for _ in range(vertices))
    ring = []
    for angle in angles:
        radius = 1.0 + rng.next_float() * max(reach - 1.0, 0.5)
        ring += [cx + radius * math.cos(angle), cy + radius * math.sin(angle)]
    return ring


def test_polygon_and_rle_ingestion_match_oracles():
    rng = SplitMix64(53)
    for i in range(100):
        h = 12 + rng.below(13)
        w = 12 + rng.below(13)
        ring = _star_ring(rng, h, w)
        got = rasterize_ring(ring, h, w)
        want = np.array(
            [[_ray_cast(ring, x + 0.5, y + 0.5) for x in range(w)] for y in range(h)],
            dtype=bool,
        )
        assert np.array_equal(got.bits, want), f"polygon {i}"

    rng = SplitMix64(54)
    for i in range(50):
        h = 2 + rng.below(24)
        w = 2 + rng.below(24)
        mask = random_mask(rng, h, w, density=0.35)
        encoded = rle_encode(mask)
        ann = {"segmentation": {"size": [h, w], "counts": list(encoded.counts)}}
        decoded = coco_annotation_mask(ann, h, w)
        assert np.array_equal(decoded.bits, mask.bits), f"rle mask {i}"


# ---------------------------------------------------------------------------
# Companion adapter package, exercised over the wire protocol only

@pytest.mark.skipif(not NODE_ADAPTER.exists(), reason="adapter package not built")
def test_bundled_node_adapter_passes_conformance(tmp_path, capsys):
    code = cli_main([
        "validate-adapter",
        "--command", shlex.join(["node", str(NODE_ADAPTER), "--stub"]),
        "--workdir", str(tmp_path / "probe"),
        "--expect-stub", "--check-saliency",
        "--handshake-timeout", "30", "--request-timeout", "30",
    ])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "adapter conformance: 14/14 checks passed" in out
