"""Shared fixtures: adapter script paths and small deterministic factories."""

import sys
from pathlib import Path

import numpy as np
import pytest

from promptaug import BinaryMask, Image, SplitMix64

ADAPTER_DIR = Path(__file__).parent / "adapters"


@pytest.fixture(scope="session")
def stub_adapter_cmd():
    return [sys.executable, str(ADAPTER_DIR / "stub_adapter.py")]


@pytest.fixture(scope="session")
def fault_adapter_cmd():
    def make(mode):
        return [sys.executable, str(ADAPTER_DIR / "fault_adapter.py"), "--mode", mode]

    return make


def random_mask(rng, height, width, density=0.4):
    bits = np.zeros((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            bits[y, x] = rng.next_float() < density
    return BinaryMask(bits)


def random_blob_mask(rng, height, width):
    """Single filled disk, clipped to bounds; never empty."""
    radius = 2 + rng.below(min(height, width) // 3)
    cy = rng.below(height)
    cx = rng.below(width)
    yy, xx = np.mgrid[0:height, 0:width]
    bits = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    return BinaryMask(bits)


def gradient_image(height, width, seed=0):
    rng = SplitMix64(seed)
    arr = np.zeros((height, width), dtype=np.uint8)
    for y in range(height):
        for x in range(width):
            arr[y, x] = rng.below(256)
    return Image(arr)
