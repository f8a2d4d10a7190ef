"""Turn an anomalous target chip into a "normal" background-only image.

Pipeline: 1-D k-means over pixel intensities separates the bright target
from clutter (k=2, brightest cluster = target); the target region is filled
with draws from a Gaussian fitted to the background pixels; the image is
then inverted and re-clustered (k=5) to find the dark shadow, which is
filled the same way from statistics that exclude both regions. The shadow
cluster can be chosen by member count (largest cluster) or by centroid
(darkest in the original image); both selection rules are provided because
neither reliably isolates shadows on every chip.

k-means here is Lloyd's algorithm on scalars with multiple random restarts.
Restart initialization samples k distinct observed values, iteration stops
when assignments stabilize, and the restart with minimal inertia wins.
Centroids are reported in ascending order with assignments relabeled to
match.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    DegenerateInputError,
    ValidationError,
    invert_image,
    validate_image,
)

__all__ = [
    "ShadowRule",
    "NormalGenConfig",
    "KMeansResult",
    "BackgroundStats",
    "NormalChip",
    "kmeans_1d",
    "segment_target",
    "segment_shadow",
    "background_stats",
    "fill_from_background",
    "generate_normal_chip",
]


class ShadowRule(str, Enum):
    """How to pick the shadow cluster after the inverted k=5 pass."""

    LARGEST_COUNT = "largest_count"      # cluster with the most member pixels
    HIGHEST_CENTROID = "highest_centroid"  # darkest in the original image


@dataclass(frozen=True)
class NormalGenConfig:
    target_k: int = 2
    shadow_k: int = 5
    n_init: int = 5
    max_iter: int = 100
    shadow_rule: ShadowRule = ShadowRule.LARGEST_COUNT
    seed: int = 0

    def validate(self) -> None:
        if self.target_k < 2 or self.shadow_k < 2:
            raise ValidationError("target_k and shadow_k must be >= 2")
        if self.n_init < 1 or self.max_iter < 1:
            raise ValidationError("n_init and max_iter must be >= 1")


@dataclass(frozen=True)
class KMeansResult:
    """Converged clustering: ascending centroids, per-value assignments,
    total inertia, and the per-iteration inertia trace of every restart
    (each trace is non-increasing by construction)."""

    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    restart_traces: tuple[tuple[float, ...], ...]
    best_restart: int

    @property
    def inertia_trace(self) -> tuple[float, ...]:
        return self.restart_traces[self.best_restart]


@dataclass(frozen=True)
class BackgroundStats:
    """Gaussian summary of the background pixels (sample std, ddof=1)."""

    mean: float
    std: float
    pixel_count: int


@dataclass(frozen=True)
class NormalChip:
    """Result of scrubbing one chip: the filled image plus both masks."""

    normal: np.ndarray
    target_mask: np.ndarray
    shadow_mask: np.ndarray


def _assign(values: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # nearest centroid, ties to the lower index (argmin keeps the first)
    return np.argmin(np.abs(values[:, None] - centroids[None, :]), axis=1)


def _inertia(values: np.ndarray, centroids: np.ndarray, assign: np.ndarray) -> float:
    return float(((values - centroids[assign]) ** 2).sum())


def _lloyd(
    values: np.ndarray, init: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, float, int, tuple[float, ...]]:
    k = init.size
    centroids = init.astype(np.float64).copy()
    assign = _assign(values, centroids)
    trace = [_inertia(values, centroids, assign)]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        counts = np.bincount(assign, minlength=k)
        sums = np.bincount(assign, weights=values, minlength=k)
        nonempty = counts > 0
        # an emptied cluster keeps its previous centroid
        centroids[nonempty] = sums[nonempty] / counts[nonempty]
        new_assign = _assign(values, centroids)
        trace.append(_inertia(values, centroids, new_assign))
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    return centroids, assign, trace[-1], n_iter, tuple(trace)


def kmeans_1d(
    values: np.ndarray,
    k: int,
    n_init: int,
    max_iter: int,
    rng: np.random.Generator,
) -> KMeansResult:
    """Lloyd's algorithm on scalars with ``n_init`` random restarts.

    Each restart initializes centroids by sampling k distinct observed
    values without replacement; the restart with minimal inertia wins
    (ties to the earlier restart). Raises DegenerateInputError when the
    input has fewer distinct values than clusters.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DegenerateInputError("k-means on empty input")
    if not np.isfinite(values).all():
        raise ValidationError("k-means input contains non-finite values")
    if k < 1:
        raise DegenerateInputError(f"k must be >= 1, got {k}")
    if n_init < 1 or max_iter < 1:
        raise ValidationError("n_init and max_iter must be >= 1")
    distinct = np.unique(values)
    if k > distinct.size:
        raise DegenerateInputError(
            f"k={k} exceeds the {distinct.size} distinct value(s) in the input"
        )

    best: tuple | None = None
    traces: list[tuple[float, ...]] = []
    best_idx = 0
    for restart in range(n_init):
        init = rng.choice(distinct, size=k, replace=False)
        cents, assign, inertia, n_iter, trace = _lloyd(values, init, max_iter)
        traces.append(trace)
        if best is None or inertia < best[2]:
            best = (cents, assign, inertia, n_iter)
            best_idx = restart

    cents, assign, inertia, n_iter = best
    order = np.argsort(cents, kind="stable")
    relabel = np.empty(k, dtype=np.intp)
    relabel[order] = np.arange(k)
    return KMeansResult(
        centroids=cents[order],
        assignments=relabel[assign],
        inertia=inertia,
        n_iter=n_iter,
        restart_traces=tuple(traces),
        best_restart=best_idx,
    )


def _check_normalized(img: np.ndarray) -> np.ndarray:
    arr = validate_image(img)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError("image must be normalized to [0, 1]")
    return arr


def _clamped_k(img: np.ndarray, k: int, what: str) -> int:
    """k, reduced to the number of distinct intensities when necessary.

    Returns k < 2 for (near-)constant images; callers handle that case.
    Only genuinely clusterable near-degenerate inputs warn here.
    """
    n_distinct = np.unique(img).size
    if n_distinct >= k:
        return k
    if n_distinct >= 2:
        warnings.warn(
            f"{what}: only {n_distinct} distinct intensity level(s); "
            f"clamping k from {k} to {n_distinct}",
            stacklevel=3,
        )
    return n_distinct


def segment_target(img, cfg: NormalGenConfig, rng: np.random.Generator) -> np.ndarray:
    """Mask of the bright (target) cluster from a k=2 intensity clustering.

    SAR targets are bright, so the cluster with the highest centroid is
    taken as foreground. A constant image yields an all-False mask with a
    warning (nothing to segment).
    """
    cfg.validate()
    arr = _check_normalized(img)
    k = _clamped_k(arr, cfg.target_k, "segment_target")
    if k < 2:
        warnings.warn("segment_target: constant image, returning empty mask")
        return np.zeros(arr.shape, dtype=bool)
    res = kmeans_1d(arr.ravel(), k, cfg.n_init, cfg.max_iter, rng)
    return (res.assignments == k - 1).reshape(arr.shape)


def segment_shadow(img, cfg: NormalGenConfig, rng: np.random.Generator) -> np.ndarray:
    """Mask of the shadow cluster, found on the inverted image with k=5.

    The image (target already filled) is inverted so shadows become bright,
    then clustered. The shadow cluster is picked per ``cfg.shadow_rule``:
    LARGEST_COUNT takes the most populated cluster, HIGHEST_CENTROID the
    cluster brightest in the inverted image (darkest in the original).
    """
    cfg.validate()
    arr = _check_normalized(img)
    k = _clamped_k(arr, cfg.shadow_k, "segment_shadow")
    if k < 2:
        warnings.warn("segment_shadow: constant image, returning empty mask")
        return np.zeros(arr.shape, dtype=bool)
    inv = invert_image(arr)
    res = kmeans_1d(inv.ravel(), k, cfg.n_init, cfg.max_iter, rng)
    if cfg.shadow_rule is ShadowRule.HIGHEST_CENTROID:
        chosen = k - 1
    else:
        counts = np.bincount(res.assignments, minlength=k)
        chosen = int(counts.argmax())  # ties to the lower cluster index
    return (res.assignments == chosen).reshape(arr.shape)


def background_stats(img, foreground: np.ndarray) -> BackgroundStats:
    """Mean and sample std of the pixels outside ``foreground``.

    std uses denominator n-1 and is 0 for a single background pixel.
    """
    arr = validate_image(img)
    mask = np.asarray(foreground, dtype=bool)
    if mask.shape != arr.shape:
        raise ValidationError(
            f"foreground shape {mask.shape} does not match image {arr.shape}"
        )
    bg = arr[~mask]
    if bg.size == 0:
        raise ValidationError("no background pixels (foreground mask is all-True)")
    if bg.size == 1 or bg.min() == bg.max():
        # exactly constant background: std is 0 by definition, not by rounding
        return BackgroundStats(mean=float(bg[0]), std=0.0, pixel_count=int(bg.size))
    return BackgroundStats(
        mean=float(bg.mean()), std=float(bg.std(ddof=1)), pixel_count=int(bg.size)
    )


def fill_from_background(
    img, region: np.ndarray, stats: BackgroundStats, rng: np.random.Generator
) -> np.ndarray:
    """Replace pixels inside ``region`` with Gaussian background draws.

    Draws come from Normal(stats.mean, stats.std) clamped to [0, 1]; pixels
    outside the region are returned bit-identical to the input.
    """
    arr = validate_image(img)
    mask = np.asarray(region, dtype=bool)
    if mask.shape != arr.shape:
        raise ValidationError(
            f"region shape {mask.shape} does not match image {arr.shape}"
        )
    out = arr.copy()
    n = int(mask.sum())
    if n:
        draws = rng.normal(stats.mean, stats.std, size=n)
        out[mask] = np.clip(draws, 0.0, 1.0)
    return out


def generate_normal_chip(
    img, cfg: NormalGenConfig, rng: np.random.Generator
) -> NormalChip:
    """Scrub one chip: segment and fill the target, then the shadow.

    The shadow pass runs on the target-filled image, and its fill draws
    from statistics that exclude both the target and the shadow so the
    replacement values are not contaminated by the regions being erased.
    """
    arr = _check_normalized(img)
    target = segment_target(arr, cfg, rng)
    filled = fill_from_background(arr, target, background_stats(arr, target), rng)
    shadow = segment_shadow(filled, cfg, rng)
    stats = background_stats(filled, target | shadow)
    normal = fill_from_background(filled, shadow, stats, rng)
    return NormalChip(normal=normal, target_mask=target, shadow_mask=shadow)
