"""Synthetic SAR-like target chips with exact pixel ground truth.

Scenes follow the standard multiplicative-speckle convention: Gaussian
clutter (clamped positive) times a unit-mean Gamma(L, 1/L) speckle field,
where L is the number of looks. A bright elliptical target gets an additive
intensity boost and an optional elliptical shadow (the target ellipse
shifted by an offset) is attenuated multiplicatively; both are painted
before the speckle draw so anomalies inherit realistic multiplicative
noise. The final chip is min-max normalized and ships with exact ellipse
membership masks, which makes these chips usable as ground truth for
segmentation and scrubbing experiments at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigError, Label, SampleRecord, make_rng, normalize_image
from .ingest import DatasetSplit

__all__ = [
    "TargetSpec",
    "ShadowSpec",
    "SceneConfig",
    "SynthSample",
    "ellipse_mask",
    "raw_scene",
    "gen_scene",
    "gen_dataset",
    "export_dataset",
]

# lower clamp for Gaussian clutter; keeps intensities strictly positive so
# multiplicative speckle cannot zero out the signal
_CLUTTER_FLOOR = 1e-6


@dataclass(frozen=True)
class TargetSpec:
    """Bright elliptical target: center (row, col), semi-axes (a, b) in
    pixels, additive intensity boost applied before speckle."""

    center: tuple[float, float]
    semi_axes: tuple[float, float]
    intensity_boost: float = 0.5


@dataclass(frozen=True)
class ShadowSpec:
    """Shadow ellipse: the target ellipse shifted by ``offset`` (drow,
    dcol), multiplied by (1 - attenuation)."""

    offset: tuple[float, float]
    attenuation: float = 0.5


@dataclass(frozen=True)
class SceneConfig:
    height: int = 64
    width: int = 64
    background_mean: float = 0.3
    background_std: float = 0.05
    speckle_looks: int = 4
    target: TargetSpec | None = None
    shadow: ShadowSpec | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ConfigError("scene dims must be positive")
        if not 0.0 < self.background_mean < 1.0:
            raise ConfigError("background_mean must lie in (0, 1)")
        if self.background_std < 0.0:
            raise ConfigError("background_std must be >= 0")
        if self.speckle_looks < 1:
            raise ConfigError("speckle_looks must be >= 1")
        if self.shadow is not None and self.target is None:
            raise ConfigError("shadow requires a target (offset is relative)")
        if self.target is not None:
            if self.target.intensity_boost < 0.0:
                raise ConfigError("intensity_boost must be >= 0")
            self._check_inside(self.target.center, self.target.semi_axes, "target")
            if self.shadow is not None:
                if not 0.0 <= self.shadow.attenuation < 1.0:
                    raise ConfigError("attenuation must lie in [0, 1)")
                sc = (
                    self.target.center[0] + self.shadow.offset[0],
                    self.target.center[1] + self.shadow.offset[1],
                )
                self._check_inside(sc, self.target.semi_axes, "shadow")

    def _check_inside(
        self, center: tuple[float, float], axes: tuple[float, float], what: str
    ) -> None:
        a, b = axes
        if a <= 0 or b <= 0:
            raise ConfigError(f"{what} semi-axes must be positive")
        r, c = center
        if r - a < 0 or r + a > self.height - 1 or c - b < 0 or c + b > self.width - 1:
            raise ConfigError(
                f"{what} ellipse (center={center}, semi_axes={axes}) leaves the "
                f"{self.height}x{self.width} image bounds"
            )


@dataclass(frozen=True)
class SynthSample:
    """A generated chip plus its exact target/shadow ground truth."""

    image: np.ndarray
    truth_target: np.ndarray
    truth_shadow: np.ndarray
    config: SceneConfig


def ellipse_mask(
    height: int,
    width: int,
    center: tuple[float, float],
    semi_axes: tuple[float, float],
) -> np.ndarray:
    """Boolean mask of pixels inside the ellipse ((r-cr)/a)^2+((c-cc)/b)^2 <= 1."""
    rr, cc = np.ogrid[:height, :width]
    a, b = semi_axes
    return ((rr - center[0]) / a) ** 2 + ((cc - center[1]) / b) ** 2 <= 1.0


def raw_scene(
    cfg: SceneConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate the pre-normalization intensity field and the truth masks.

    Draw order is fixed (clutter normals, then speckle gammas) so a given
    generator state always produces the same field.
    """
    cfg.validate()
    shape = (cfg.height, cfg.width)
    base = rng.normal(cfg.background_mean, cfg.background_std, size=shape)
    base = np.clip(base, _CLUTTER_FLOOR, 1.0)

    tmask = np.zeros(shape, dtype=bool)
    smask = np.zeros(shape, dtype=bool)
    if cfg.target is not None:
        tmask = ellipse_mask(*shape, cfg.target.center, cfg.target.semi_axes)
        base[tmask] += cfg.target.intensity_boost
        if cfg.shadow is not None:
            sc = (
                cfg.target.center[0] + cfg.shadow.offset[0],
                cfg.target.center[1] + cfg.shadow.offset[1],
            )
            smask = ellipse_mask(*shape, sc, cfg.target.semi_axes)
            # target wins where the ellipses overlap; keeps truths disjoint
            smask &= ~tmask
            base[smask] *= 1.0 - cfg.shadow.attenuation

    looks = float(cfg.speckle_looks)
    speckle = rng.gamma(shape=looks, scale=1.0 / looks, size=shape)
    return base * speckle, tmask, smask


def gen_scene(cfg: SceneConfig) -> SynthSample:
    """Generate one normalized chip from its config (pure in cfg)."""
    raw, tmask, smask = raw_scene(cfg, make_rng(cfg.seed))
    return SynthSample(
        image=normalize_image(raw),
        truth_target=tmask,
        truth_shadow=smask,
        config=cfg,
    )


def _randomized_target(
    base_cfg: SceneConfig, rng: np.random.Generator
) -> SceneConfig:
    """Place the template target (and shadow) at a random feasible position.

    Semi-axes are scaled uniformly in [0.7, 1.3]x the template; the center
    is drawn uniformly over positions where both ellipses stay in bounds.
    """
    assert base_cfg.target is not None
    a0, b0 = base_cfg.target.semi_axes
    a = a0 * rng.uniform(0.7, 1.3)
    b = b0 * rng.uniform(0.7, 1.3)
    dr, dc = (0.0, 0.0)
    if base_cfg.shadow is not None:
        dr, dc = base_cfg.shadow.offset
    r_lo = a + max(0.0, -dr)
    r_hi = base_cfg.height - 1 - a - max(0.0, dr)
    c_lo = b + max(0.0, -dc)
    c_hi = base_cfg.width - 1 - b - max(0.0, dc)
    if r_lo > r_hi or c_lo > c_hi:
        raise ConfigError(
            "image too small to place the target (and shadow) at any position"
        )
    center = (rng.uniform(r_lo, r_hi), rng.uniform(c_lo, c_hi))
    target = replace(base_cfg.target, center=center, semi_axes=(a, b))
    return replace(base_cfg, target=target)


def gen_dataset(
    n_train_normal: int,
    n_test_normal: int,
    n_test_anom: int,
    base_cfg: SceneConfig,
    seed: int,
    name: str = "synthetic",
) -> DatasetSplit:
    """Generate a full train/test split of synthetic chips.

    Normals drop the target and shadow; anomalous chips randomize the
    template target's placement and size. Each sample's generator is seeded
    from (seed, global sample index), so generation is a pure function of
    the arguments and per-sample work can run in any order.
    """
    if min(n_train_normal, n_test_normal, n_test_anom) < 0:
        raise ConfigError("sample counts must be >= 0")
    if n_test_anom > 0 and base_cfg.target is None:
        raise ConfigError("base_cfg needs a target template to generate anomalies")

    normal_cfg = replace(base_cfg, target=None, shadow=None)

    def sample(index: int, anomalous: bool, rec_id: str) -> SampleRecord:
        ss = np.random.SeedSequence([int(seed), int(index)])
        place_seq, scene_seq = ss.spawn(2)
        cfg = normal_cfg
        if anomalous:
            cfg = _randomized_target(
                base_cfg, np.random.Generator(np.random.PCG64(place_seq))
            )
        scene_seed = int(scene_seq.generate_state(1, np.uint64)[0])
        out = gen_scene(replace(cfg, seed=scene_seed))
        mask = out.truth_target | out.truth_shadow if anomalous else None
        label = Label.ANOMALOUS if anomalous else Label.NORMAL
        return SampleRecord(id=rec_id, image=out.image, label=label, mask=mask)

    idx = 0
    train: list[SampleRecord] = []
    for i in range(n_train_normal):
        train.append(sample(idx, False, f"train/normal/chip_{i:04d}"))
        idx += 1
    test: list[SampleRecord] = []
    for i in range(n_test_normal):
        test.append(sample(idx, False, f"test/normal/chip_{i:04d}"))
        idx += 1
    for i in range(n_test_anom):
        test.append(sample(idx, True, f"test/anomalous/chip_{i:04d}"))
        idx += 1
    return DatasetSplit(name=name, train=train, test=test)


def export_dataset(split: DatasetSplit, root) -> None:
    """Write a split to the ingest directory layout.

    Images are stored as 16-bit grayscale PNG; masks as 8-bit 0/255 PNG
    under ground_truth/anomalous. Round-tripping through ``load_dataset``
    reproduces pixels to within 16-bit quantization.
    """
    from pathlib import Path

    from PIL import Image as PILImage

    from . import ingest

    root = Path(root)
    for sub in (
        ingest.TRAIN_NORMAL,
        ingest.TEST_NORMAL,
        ingest.TEST_ANOMALOUS,
        ingest.GROUND_TRUTH,
    ):
        (root / sub).mkdir(parents=True, exist_ok=True)

    def write_image(rec: SampleRecord) -> None:
        path = root / f"{rec.id}.png"
        arr = np.round(rec.image * 65535.0).astype(np.uint16)
        PILImage.fromarray(arr).save(path)
        if rec.label is Label.ANOMALOUS and rec.mask is not None:
            mask = (rec.mask.astype(np.uint8)) * 255
            stem = Path(rec.id).name
            PILImage.fromarray(mask, mode="L").save(
                root / ingest.GROUND_TRUTH / f"{stem}.png"
            )

    for rec in split.train:
        write_image(rec)
    for rec in split.test:
        write_image(rec)
