"""Load user-supplied datasets from a documented directory layout.

Expected tree (the bit-exact contract shared with the synthetic exporter)::

    <root>/
      train/normal/*.png|*.pgm        normal-only training images
      test/normal/*.png|*.pgm         normal test images
      test/anomalous/*.png|*.pgm      anomalous test images
      ground_truth/anomalous/<same-stem>.png   optional pixel masks

Images are decoded to grayscale (color inputs are reduced by channel
average, with a warning), min-max normalized per image, and sorted by file
name so two loads of the same tree are bit-identical. Ground-truth masks
are matched to anomalous test images by file stem and binarized at half
their dynamic range, tolerating anti-aliased exports. An anomalous image
without a mask is legal; pixel-level metrics skip it later with a warning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .core import (
    DecodeError,
    Label,
    LayoutError,
    SampleRecord,
    ValidationError,
    normalize_image,
)

__all__ = [
    "IMAGE_SUFFIXES",
    "TRAIN_NORMAL",
    "TEST_NORMAL",
    "TEST_ANOMALOUS",
    "GROUND_TRUTH",
    "DatasetSplit",
    "read_gray",
    "read_mask",
    "load_dataset",
    "validate_layout",
]

IMAGE_SUFFIXES = (".png", ".pgm")

TRAIN_NORMAL = Path("train") / "normal"
TEST_NORMAL = Path("test") / "normal"
TEST_ANOMALOUS = Path("test") / "anomalous"
GROUND_TRUTH = Path("ground_truth") / "anomalous"

_EXPECTED_TREE = (
    "expected layout:\n"
    "  <root>/train/normal/*.png|*.pgm\n"
    "  <root>/test/normal/*.png|*.pgm\n"
    "  <root>/test/anomalous/*.png|*.pgm\n"
    "  <root>/ground_truth/anomalous/<same-stem>.png   (optional)"
)


@dataclass
class DatasetSplit:
    """Train/test partition of SampleRecords. Train is normal-only."""

    name: str
    train: list[SampleRecord] = field(default_factory=list)
    test: list[SampleRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        for rec in self.train:
            if rec.label is not Label.NORMAL:
                raise ValidationError(
                    f"dataset {self.name!r}: train record {rec.id!r} is not normal"
                )


def _decode(path: Path) -> np.ndarray:
    """Decode an image file to a float64 grayscale array (raw intensities)."""
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im, dtype=np.float64)
    except Exception as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    if arr.ndim == 3:
        warnings.warn(
            f"{path.name}: color image reduced to grayscale by channel average",
            stacklevel=3,
        )
        arr = arr[..., :3].mean(axis=2)
    if arr.ndim != 2:
        raise DecodeError(f"{path}: unsupported image shape {arr.shape}")
    return arr


def read_gray(path: Path) -> np.ndarray:
    """Read an image file and min-max normalize it to [0, 1]."""
    return normalize_image(_decode(Path(path)))


def read_mask(path: Path, image_shape: tuple[int, int]) -> np.ndarray:
    """Read a ground-truth mask, binarized at half its dynamic range.

    A constant-valued file binarizes to (value > 0). Raises ValidationError
    if the mask dimensions do not match ``image_shape``.
    """
    path = Path(path)
    arr = _decode(path)
    if arr.shape != tuple(image_shape):
        raise ValidationError(
            f"mask {path.name}: shape {arr.shape} does not match image "
            f"shape {tuple(image_shape)}"
        )
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return arr > 0
    return arr >= lo + 0.5 * (hi - lo)


def _list_images(directory: Path) -> list[Path]:
    files = [
        p
        for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    return sorted(files, key=lambda p: p.name)


def _check_duplicate_stems(files: list[Path], where: str) -> None:
    seen: dict[str, str] = {}
    for p in files:
        if p.stem in seen:
            raise LayoutError(
                f"{where}: duplicate stem {p.stem!r} ({seen[p.stem]} vs {p.name}); "
                "stems must be unique within a directory"
            )
        seen[p.stem] = p.name


def load_dataset(root: Path | str, name: str | None = None) -> DatasetSplit:
    """Load a dataset tree into a DatasetSplit.

    Record order is fixed by lexicographic file name within each
    subdirectory; the test list holds normal records first, then anomalous.
    Record ids are the root-relative path without extension.
    """
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"dataset root {root} does not exist\n{_EXPECTED_TREE}")
    missing = [
        str(sub)
        for sub in (TRAIN_NORMAL, TEST_NORMAL, TEST_ANOMALOUS)
        if not (root / sub).is_dir()
    ]
    if missing:
        raise LayoutError(
            f"missing directories under {root}: {', '.join(missing)}\n{_EXPECTED_TREE}"
        )

    train_files = _list_images(root / TRAIN_NORMAL)
    if not train_files:
        raise LayoutError(f"{root / TRAIN_NORMAL}: no training images found")
    test_normal_files = _list_images(root / TEST_NORMAL)
    test_anom_files = _list_images(root / TEST_ANOMALOUS)
    for files, sub in (
        (train_files, TRAIN_NORMAL),
        (test_normal_files, TEST_NORMAL),
        (test_anom_files, TEST_ANOMALOUS),
    ):
        _check_duplicate_stems(files, str(root / sub))

    mask_by_stem: dict[str, Path] = {}
    gt_dir = root / GROUND_TRUTH
    if gt_dir.is_dir():
        mask_files = _list_images(gt_dir)
        _check_duplicate_stems(mask_files, str(gt_dir))
        anom_stems = {p.stem for p in test_anom_files}
        for p in mask_files:
            if p.stem not in anom_stems:
                raise LayoutError(
                    f"orphan mask {p.name} in {gt_dir}: no matching "
                    f"test/anomalous image"
                )
            mask_by_stem[p.stem] = p

    def record(path: Path, sub: Path, label: Label) -> SampleRecord:
        img = read_gray(path)
        mask = None
        if label is Label.ANOMALOUS and path.stem in mask_by_stem:
            mask = read_mask(mask_by_stem[path.stem], img.shape)
        return SampleRecord(
            id=str(sub / path.stem), image=img, label=label, mask=mask
        )

    train = [record(p, TRAIN_NORMAL, Label.NORMAL) for p in train_files]
    test = [record(p, TEST_NORMAL, Label.NORMAL) for p in test_normal_files]
    test += [record(p, TEST_ANOMALOUS, Label.ANOMALOUS) for p in test_anom_files]
    return DatasetSplit(name=name or root.name, train=train, test=test)


def validate_layout(root: Path | str) -> list[str]:
    """Diagnose a dataset tree; returns human-readable findings ([] = valid).

    Never raises: every problem becomes one finding string. An anomalous
    image without a mask is legal and is not reported.
    """
    root = Path(root)
    findings: list[str] = []
    if not root.is_dir():
        return [f"dataset root {root} does not exist"]

    listings: dict[Path, list[Path]] = {}
    for sub in (TRAIN_NORMAL, TEST_NORMAL, TEST_ANOMALOUS):
        d = root / sub
        if not d.is_dir():
            findings.append(f"missing directory {sub}")
            listings[sub] = []
        else:
            listings[sub] = _list_images(d)

    if (root / TRAIN_NORMAL).is_dir() and not listings[TRAIN_NORMAL]:
        findings.append("no normal training images in train/normal")

    for sub, files in listings.items():
        seen: dict[str, str] = {}
        for p in files:
            if p.stem in seen:
                findings.append(
                    f"duplicate stem {p.stem!r} in {sub} "
                    f"({seen[p.stem]} vs {p.name})"
                )
            seen[p.stem] = p.name

    gt_dir = root / GROUND_TRUTH
    if gt_dir.is_dir():
        anom_stems = {p.stem for p in listings[TEST_ANOMALOUS]}
        for p in _list_images(gt_dir):
            if p.stem not in anom_stems:
                findings.append(
                    f"orphan mask {GROUND_TRUTH / p.name}: no matching "
                    f"test/anomalous image"
                )

    for sub, files in listings.items():
        for p in files:
            try:
                _decode(root / sub / p.name)
            except DecodeError as exc:
                findings.append(str(exc))
    return findings
