"""Render anomaly maps and result panels to 8-bit RGB rasters.

Heatmaps are min-max normalized per map and pushed through a fixed
five-anchor colormap (dark purple to yellow, monotone lightness, linear
RGB interpolation between anchors), so two maps differing by a positive
affine transform render identically and a constant map renders as the low
end. Panels concatenate input / ground truth / predicted mask / overlay
cells horizontally; captions travel as data rather than being rasterized,
which keeps PNG output byte-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .core import SampleRecord, ValidationError
from .models import AnomalyMap

__all__ = [
    "Panel",
    "apply_colormap",
    "render_heatmap",
    "render_panel",
    "panel_image",
    "save_panel",
]

# anchor colors (value in [0,1] -> RGB), luminance strictly increasing
_COLOR_ANCHORS = np.array(
    [
        [68, 1, 84],
        [59, 82, 139],
        [33, 145, 140],
        [94, 201, 98],
        [253, 231, 37],
    ],
    dtype=np.float64,
)

OVERLAY_INPUT_WEIGHT = 0.6  # input/heatmap blend ratio in overlay cells
_SEPARATOR_PX = 2


@dataclass(frozen=True)
class Panel:
    """Ordered raster cells plus their captions (same dims per cell)."""

    cells: tuple[np.ndarray, ...]
    captions: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.cells) != len(self.captions):
            raise ValidationError("cells and captions must align")
        shapes = {cell.shape for cell in self.cells}
        if len(shapes) != 1:
            raise ValidationError(f"panel cells differ in shape: {shapes}")


def apply_colormap(values: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] through the fixed anchor colormap to uint8 RGB."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    pos = v * (len(_COLOR_ANCHORS) - 1)
    lo = np.minimum(pos.astype(np.intp), len(_COLOR_ANCHORS) - 2)
    frac = (pos - lo)[..., None]
    rgb = _COLOR_ANCHORS[lo] * (1.0 - frac) + _COLOR_ANCHORS[lo + 1] * frac
    return np.round(rgb).astype(np.uint8)


def _gray_rgb(img: np.ndarray) -> np.ndarray:
    g = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return np.stack([g, g, g], axis=-1)


def _mask_rgb(mask: np.ndarray) -> np.ndarray:
    return _gray_rgb(np.asarray(mask, dtype=bool).astype(np.float64))


def render_heatmap(
    amap: AnomalyMap, value_range: tuple[float, float] | None = None
) -> np.ndarray:
    """Anomaly map as an RGB heatmap.

    Default display scaling is per-map min-max; pass ``value_range`` =
    (lo, hi) to render on an absolute scale instead, so maps of different
    images are directly comparable.
    """
    scores = amap.scores
    lo, hi = (scores.min(), scores.max()) if value_range is None else value_range
    if hi <= lo:
        return apply_colormap(np.zeros_like(scores))
    return apply_colormap((scores - lo) / (hi - lo))


def render_panel(
    sample: SampleRecord, amap: AnomalyMap, threshold: float
) -> Panel:
    """Build the results panel for one sample.

    Cells: input, ground truth (omitted when the sample has no mask),
    predicted mask (map >= threshold), and the input/heatmap overlay.
    """
    if amap.scores.shape != sample.image.shape:
        raise ValidationError(
            f"sample {sample.id!r}: map shape {amap.scores.shape} does not "
            f"match image shape {sample.image.shape}"
        )
    input_rgb = _gray_rgb(sample.image)
    heat = render_heatmap(amap)
    overlay = np.round(
        OVERLAY_INPUT_WEIGHT * input_rgb.astype(np.float64)
        + (1.0 - OVERLAY_INPUT_WEIGHT) * heat.astype(np.float64)
    ).astype(np.uint8)
    predicted = _mask_rgb(amap.scores >= threshold)

    cells: list[np.ndarray] = [input_rgb]
    captions: list[str] = ["input"]
    if sample.mask is not None:
        cells.append(_mask_rgb(sample.mask))
        captions.append("ground truth")
    cells.append(predicted)
    captions.append("predicted mask")
    cells.append(overlay)
    captions.append("overlay")
    return Panel(cells=tuple(cells), captions=tuple(captions))


def panel_image(panel: Panel) -> np.ndarray:
    """Concatenate panel cells horizontally with thin white separators."""
    h = panel.cells[0].shape[0]
    sep = np.full((h, _SEPARATOR_PX, 3), 255, dtype=np.uint8)
    pieces: list[np.ndarray] = []
    for i, cell in enumerate(panel.cells):
        if i:
            pieces.append(sep)
        pieces.append(cell)
    return np.concatenate(pieces, axis=1)


def save_panel(panel: Panel, path: Path | str) -> Path:
    """Write the composed panel as an 8-bit RGB PNG; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(panel_image(panel), mode="RGB").save(path)
    return path
