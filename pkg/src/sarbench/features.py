"""Deterministic multi-scale patch features on a strided grid.

Stands in for a pretrained CNN backbone with handcrafted statistics: for
each window size w and each stride-spaced grid cell, the local mean, local
std (population), and mean gradient magnitude (central differences,
replicate border) over the w x w neighborhood centered on the cell. The
channel order is fixed as (window ascending) x (mean, std, gradmag), so
C = 3 * len(window_sizes). Multiple window sizes give the multi-scale
context that patch-distribution models need.

``select_channels`` provides the random channel subsampling used by
patch-distribution modeling (the classic default keeps 100 of the
backbone's channels; with fewer channels than that, all are kept).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ConfigError, ValidationError, validate_image

__all__ = [
    "FeatureConfig",
    "FeatureMap",
    "extract_features",
    "default_select_k",
    "sample_channel_indices",
    "take_channels",
    "select_channels",
]

# classic channel-subsample size for patch-distribution modeling
PADIM_DEFAULT_CHANNELS = 100


@dataclass(frozen=True)
class FeatureConfig:
    window_sizes: tuple[int, ...] = (3, 7, 15)
    stride: int = 4
    select_k: int | None = None

    def validate(self) -> None:
        if not self.window_sizes:
            raise ConfigError("window_sizes must not be empty")
        for w in self.window_sizes:
            if w < 3 or w % 2 == 0:
                raise ConfigError(f"window sizes must be odd and >= 3, got {w}")
        if tuple(sorted(self.window_sizes)) != tuple(self.window_sizes):
            raise ConfigError("window_sizes must be ascending")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.select_k is not None and self.select_k < 1:
            raise ConfigError("select_k must be >= 1 when given")

    @property
    def channels(self) -> int:
        return 3 * len(self.window_sizes)


@dataclass(frozen=True)
class FeatureMap:
    """C x grid_h x grid_w feature grid with fixed channel names."""

    data: np.ndarray
    channel_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise ValidationError(f"feature data must be 3-D, got {self.data.shape}")
        if len(self.channel_names) != self.data.shape[0]:
            raise ValidationError("channel_names length must match data channels")
        if not np.isfinite(self.data).all():
            raise ValidationError("feature map contains non-finite values")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def grid_h(self) -> int:
        return self.data.shape[1]

    @property
    def grid_w(self) -> int:
        return self.data.shape[2]

    def vectors(self) -> np.ndarray:
        """Cell feature vectors as a (grid_h * grid_w, C) array."""
        return self.data.reshape(self.channels, -1).T


def _gradient_magnitude(img: np.ndarray) -> np.ndarray:
    # central differences with replicate border
    pad = np.pad(img, 1, mode="edge")
    gr = 0.5 * (pad[2:, 1:-1] - pad[:-2, 1:-1])
    gc = 0.5 * (pad[1:-1, 2:] - pad[1:-1, :-2])
    return np.hypot(gr, gc)


def _grid_windows(arr: np.ndarray, w: int, rows: np.ndarray, cols: np.ndarray):
    """(len(rows), len(cols), w, w) windows centered on the grid points,
    replicate-padded at the borders."""
    half = w // 2
    padded = np.pad(arr, half, mode="edge")
    wins = sliding_window_view(padded, (w, w))
    return wins[rows][:, cols]


def extract_features(img, cfg: FeatureConfig) -> FeatureMap:
    """Extract the multi-scale statistics grid from a normalized image.

    Grid dims are ceil(image dims / stride); cell (i, j) is centered on
    pixel (i * stride, j * stride). Deterministic: identical (img, cfg)
    produce a bit-identical map.
    """
    cfg.validate()
    arr = validate_image(img)
    h, w_img = arr.shape
    max_win = max(cfg.window_sizes)
    if h < max_win or w_img < max_win:
        raise ConfigError(
            f"image {h}x{w_img} is smaller than the largest window ({max_win})"
        )
    rows = np.arange(0, h, cfg.stride)
    cols = np.arange(0, w_img, cfg.stride)
    gmag = _gradient_magnitude(arr)

    planes: list[np.ndarray] = []
    names: list[str] = []
    for w in cfg.window_sizes:
        wins = _grid_windows(arr, w, rows, cols)
        planes.append(wins.mean(axis=(-2, -1)))
        planes.append(wins.std(axis=(-2, -1)))
        planes.append(_grid_windows(gmag, w, rows, cols).mean(axis=(-2, -1)))
        names += [f"w{w}_mean", f"w{w}_std", f"w{w}_gradmag"]
    return FeatureMap(data=np.stack(planes), channel_names=tuple(names))


def default_select_k(channels: int) -> int:
    """Channel-subsample size: 100 when available, else all channels."""
    return min(PADIM_DEFAULT_CHANNELS, channels)


def sample_channel_indices(
    channels: int, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform sample of k distinct channel indices, sorted ascending."""
    if not 1 <= k <= channels:
        raise ValidationError(f"k={k} outside [1, {channels}]")
    return np.sort(rng.choice(channels, size=k, replace=False))


def take_channels(fm: FeatureMap, indices: np.ndarray) -> FeatureMap:
    """Restrict a feature map to the given channel indices."""
    indices = np.asarray(indices, dtype=np.intp)
    return FeatureMap(
        data=fm.data[indices],
        channel_names=tuple(fm.channel_names[i] for i in indices),
    )


def select_channels(fm: FeatureMap, k: int, rng: np.random.Generator) -> FeatureMap:
    """Random channel subselection (sorted, without replacement).

    Draws exactly one sample from ``rng``; to apply the same subset to many
    maps, draw indices once with ``sample_channel_indices`` and slice each
    map with ``take_channels``.
    """
    return take_channels(fm, sample_channel_indices(fm.channels, k, rng))
