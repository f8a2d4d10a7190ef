"""Shared helpers for the test suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from sarbench.features import FeatureMap


def fm_from_array(data: np.ndarray) -> FeatureMap:
    """Wrap a (C, gh, gw) array as a FeatureMap with generic channel names."""
    data = np.asarray(data, dtype=np.float64)
    return FeatureMap(
        data=data, channel_names=tuple(f"c{i}" for i in range(data.shape[0]))
    )


def write_gray_png(path: Path, img01: np.ndarray, bits: int = 8) -> Path:
    """Write a [0,1] float image as an 8- or 16-bit grayscale PNG."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if bits == 8:
        arr = np.round(np.clip(img01, 0, 1) * 255).astype(np.uint8)
        PILImage.fromarray(arr, mode="L").save(path)
    elif bits == 16:
        arr = np.round(np.clip(img01, 0, 1) * 65535).astype(np.uint16)
        PILImage.fromarray(arr).save(path)
    else:
        raise ValueError(bits)
    return path


def build_tree(
    root: Path,
    n_train: int = 3,
    n_test_normal: int = 2,
    n_test_anom: int = 2,
    n_masks: int | None = None,
    size: int = 16,
    seed: int = 0,
) -> Path:
    """Create a small valid dataset tree with random images."""
    rng = np.random.default_rng(seed)
    if n_masks is None:
        n_masks = n_test_anom
    for i in range(n_train):
        write_gray_png(root / "train/normal" / f"img_{i:03d}.png", rng.random((size, size)))
    for i in range(n_test_normal):
        write_gray_png(root / "test/normal" / f"img_{i:03d}.png", rng.random((size, size)))
    for i in range(n_test_anom):
        write_gray_png(root / "test/anomalous" / f"img_{i:03d}.png", rng.random((size, size)))
        if i < n_masks:
            mask = np.zeros((size, size))
            mask[2:6, 3:8] = 1.0
            write_gray_png(root / "ground_truth/anomalous" / f"img_{i:03d}.png", mask)
    # ensure all directories exist even when a count is zero
    for sub in ("train/normal", "test/normal", "test/anomalous"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    return root
