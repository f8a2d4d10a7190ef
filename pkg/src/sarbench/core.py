"""Foundational image types, preprocessing, and the randomness contract.

Images are plain 2-D float64 numpy arrays (rows x cols, row-major), with
intensities normalized to [0, 1] before they enter any model. Ground-truth
masks are 2-D boolean arrays of the same shape (True = anomalous pixel).

Randomness contract
-------------------
All stochastic operations take an explicit ``numpy.random.Generator``. The
toolkit pins the PCG64 bit generator: the same seed produces the same draw
sequence on every platform. Derived seeds (per-sample, per-run) are computed
with ``numpy.random.SeedSequence`` so that parallel and sequential execution
agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "SarBenchError",
    "ValidationError",
    "LayoutError",
    "DecodeError",
    "ConfigError",
    "DegenerateInputError",
    "MetricUndefinedError",
    "Label",
    "SampleRecord",
    "make_rng",
    "as_rng",
    "derive_seed",
    "validate_image",
    "normalize_image",
    "invert_image",
]


class SarBenchError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SarBenchError, ValueError):
    """Input data violates a documented invariant."""


class LayoutError(SarBenchError):
    """A dataset directory does not follow the documented layout."""


class DecodeError(SarBenchError):
    """An image file exists but cannot be decoded."""


class ConfigError(SarBenchError, ValueError):
    """A configuration object or file is invalid."""


class DegenerateInputError(SarBenchError, ValueError):
    """Input is too degenerate for the requested operation (e.g. k-means
    with fewer distinct values than clusters)."""


class MetricUndefinedError(SarBenchError):
    """A metric is undefined for the given inputs (e.g. ROC AUC with a
    single class present)."""


class Label(str, Enum):
    """Image-level class of a sample."""

    NORMAL = "normal"
    ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class SampleRecord:
    """One dataset sample: an image, its label, and an optional pixel mask.

    Invariants (checked on construction):
      * image is 2-D, finite;
      * mask, when present, is boolean with the same shape as the image;
      * a NORMAL sample may only carry an all-False mask.
    """

    id: str
    image: np.ndarray
    label: Label
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        img = validate_image(self.image)
        object.__setattr__(self, "image", img)
        if self.mask is not None:
            mask = np.asarray(self.mask)
            if mask.dtype != np.bool_:
                mask = mask.astype(bool)
            if mask.shape != img.shape:
                raise ValidationError(
                    f"sample {self.id!r}: mask shape {mask.shape} does not match "
                    f"image shape {img.shape}"
                )
            if self.label is Label.NORMAL and mask.any():
                raise ValidationError(
                    f"sample {self.id!r}: normal sample carries a non-empty mask"
                )
            object.__setattr__(self, "mask", mask)


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------

def make_rng(seed: int) -> np.random.Generator:
    """Create the toolkit's pinned generator (PCG64) from an integer seed."""
    return np.random.Generator(np.random.PCG64(seed))


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Coerce a Generator, seed, or None into a Generator.

    None yields an unseeded PCG64 stream; pass explicit seeds anywhere
    reproducibility matters.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.Generator(np.random.PCG64())
    return make_rng(int(rng))


def derive_seed(base_seed: int, index: int) -> int:
    """Derive a child seed deterministically from (base_seed, index).

    Uses SeedSequence entropy mixing so nearby indices produce decorrelated
    streams. The result is a 64-bit unsigned integer.
    """
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


# ---------------------------------------------------------------------------
# image preprocessing
# ---------------------------------------------------------------------------

def validate_image(img: np.ndarray) -> np.ndarray:
    """Check that ``img`` is a finite 2-D array; return it as float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"image must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError("image is empty")
    finite = np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise ValidationError(f"non-finite pixel at flat index {idx}")
    return arr


def normalize_image(img: np.ndarray) -> np.ndarray:
    """Min-max normalize an image to [0, 1] (per image).

    A constant image maps to all zeros (treated as pure background) so that
    degenerate inputs still flow through the pipeline. Idempotent: applying
    it twice gives the same result bit-for-bit.
    """
    arr = validate_image(img)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def invert_image(img: np.ndarray) -> np.ndarray:
    """Complement a normalized image: x -> 1 - x.

    Requires all pixels in [0, 1]; an involution on normalized images.
    """
    arr = validate_image(img)
    if arr.min() < 0.0 or arr.max() > 1.0:
        bad = np.flatnonzero((arr < 0.0) | (arr > 1.0))[0]
        raise ValidationError(
            f"pixel outside [0, 1] at flat index {int(bad)}; normalize first"
        )
    return 1.0 - arr
