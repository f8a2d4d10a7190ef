"""Scrub a target chip into a "normal" background-only image.

The two-pass pipeline: k=2 intensity clustering finds the bright target,
which is filled with draws from the background Gaussian; the image is then
inverted and clustered with k=5 to find the dark shadow, filled the same
way. Compares both shadow-cluster selection rules on the same chip.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from sarbench.core import make_rng
from sarbench.normalgen import NormalGenConfig, ShadowRule, generate_normal_chip
from sarbench.synthesize import SceneConfig, ShadowSpec, TargetSpec, gen_scene

OUT = Path("demo_out/02")
OUT.mkdir(parents=True, exist_ok=True)


def to_png(img01, path):
    Image.fromarray(np.round(img01 * 255).astype(np.uint8), mode="L").save(path)


scene = gen_scene(
    SceneConfig(
        height=64, width=64, background_mean=0.3, background_std=0.05,
        speckle_looks=36,
        target=TargetSpec((26.0, 31.0), (7.0, 5.0), intensity_boost=0.7),
        shadow=ShadowSpec((12.0, 0.0), attenuation=0.8),
        seed=12,
    )
)
to_png(scene.image, OUT / "input.png")

for rule in (ShadowRule.HIGHEST_CENTROID, ShadowRule.LARGEST_COUNT):
    cfg = NormalGenConfig(shadow_rule=rule)
    chip = generate_normal_chip(scene.image, cfg, make_rng(99))
    altered = (chip.normal != scene.image)[scene.truth_target].mean()
    shadow_iou = (chip.shadow_mask & scene.truth_shadow).sum() / max(
        (chip.shadow_mask | scene.truth_shadow).sum(), 1
    )
    print(
        f"rule={rule.value}: {altered:.0%} of true target pixels altered, "
        f"shadow IoU {shadow_iou:.2f}, shadow mask covers "
        f"{chip.shadow_mask.mean():.0%} of the chip"
    )
    to_png(chip.normal, OUT / f"normal_{rule.value}.png")
    to_png(chip.target_mask.astype(float), OUT / f"target_mask_{rule.value}.png")
    to_png(chip.shadow_mask.astype(float), OUT / f"shadow_mask_{rule.value}.png")

print(
    "\nthe darkest-centroid rule isolates the shadow; the largest-count "
    "rule follows the literal wording and usually grabs the background."
)
print(f"wrote before/after images to {OUT}/")
