"""Augmentation engine: the three training transforms (rotate, noise,
darken), the four bias-set transforms (blur, exposure, crop, rotation),
and the planner that multiplies per-class training counts.

Multiplicity counts include the original: k = 3 means the original plus
two generated copies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    DatasetManifest,
    PixelImage,
    SampleRecord,
    SplitPlan,
    _round_half_up,
    load_image,
    resize_bilinear,
    save_image,
)

AUGMENT_KINDS = ("rotate90", "gaussian_noise", "darken", "blur", "exposure", "crop")


@dataclass(frozen=True)
class AugmentOp:
    kind: str
    amount: float | None = None    # noise selection probability / darken amount
    strength: float | None = None  # noise sigma as a fraction of full range
    factor: float | None = None    # brightness multiplier
    radius: int | None = None      # blur window radius
    fraction: float | None = None  # crop keep fraction

    def __post_init__(self):
        if self.kind not in AUGMENT_KINDS:
            raise ValueError(f"unknown augment kind {self.kind!r}")
        for name in ("amount", "strength", "fraction"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.factor is not None and self.factor <= 0:
            raise ValueError("factor must be positive")
        if self.radius is not None and self.radius < 1:
            raise ValueError("radius must be >= 1")


# Training-split recipe: 90-degree rotation, heavy additive noise
# (amount 50%, strength 60%), and darkening by 30%.
TRAIN_CYCLE = (
    AugmentOp("rotate90"),
    AugmentOp("gaussian_noise", amount=0.5, strength=0.6),
    AugmentOp("darken", amount=0.3),
)

# Bias-set recipe used to expand underrepresented subgroups.
BIAS_CYCLE = (
    AugmentOp("blur", radius=1),
    AugmentOp("exposure", factor=1.25),
    AugmentOp("crop", fraction=0.8),
    AugmentOp("rotate90"),
)

DEFAULT_MULTIPLICITY = {"benign": 3, "malignant": 4}


def rotate90(image: PixelImage) -> PixelImage:
    """Clockwise quarter turn: output(r, c) = input(H-1-c, r)."""
    return PixelImage(np.ascontiguousarray(np.rot90(image.pixels, k=-1, axes=(0, 1))))


def gaussian_noise(image: PixelImage, amount: float, strength: float,
                   seed) -> PixelImage:
    """Additive Gaussian noise on a seeded random subset of pixel locations.

    Each location is selected with probability `amount`; selected pixels get
    per-channel noise with sigma = strength * 255, rounded half-up and
    clamped to [0, 255].
    """
    if not 0.0 <= amount <= 1.0 or not 0.0 <= strength <= 1.0:
        raise ValueError("amount and strength must be in [0, 1]")
    rng = np.random.default_rng(seed)
    h, w, c = image.pixels.shape
    mask = rng.random((h, w)) < amount
    noise = rng.normal(0.0, strength * 255.0, size=(h, w, c))
    delta = _round_half_up(noise) * mask[:, :, None]
    out = np.clip(image.pixels.astype(np.int64) + delta.astype(np.int64), 0, 255)
    return PixelImage(out.astype(np.uint8))


def adjust_brightness(image: PixelImage, factor: float) -> PixelImage:
    """Scale intensities by `factor` (darken < 1, exposure > 1)."""
    if factor <= 0:
        raise ValueError("factor must be positive")
    out = np.clip(_round_half_up(image.pixels.astype(np.float64) * factor), 0, 255)
    return PixelImage(out.astype(np.uint8))


def box_blur(image: PixelImage, radius: int) -> PixelImage:
    """Mean over the (2r+1)^2 window, edge-clamped, rounded half-up.

    Uses an integer summed-area table so results are exact and
    byte-deterministic.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    r = radius
    padded = np.pad(image.pixels.astype(np.int64), ((r, r), (r, r), (0, 0)), mode="edge")
    sat = padded.cumsum(axis=0).cumsum(axis=1)
    sat = np.pad(sat, ((1, 0), (1, 0), (0, 0)))
    h, w = image.height, image.width
    win = 2 * r + 1
    # window sum at output (i, j) spans padded rows i..i+2r, cols j..j+2r
    sums = (sat[win:win + h, win:win + w]
            - sat[win:win + h, :w]
            - sat[:h, win:win + w]
            + sat[:h, :w])
    means = np.floor(sums / (win * win) + 0.5)
    return PixelImage(np.clip(means, 0, 255).astype(np.uint8))


def center_crop(image: PixelImage, keep_fraction: float) -> PixelImage:
    """Keep the centered `keep_fraction` window, then resize back to the
    original dimensions."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    if keep_fraction == 1.0:
        return PixelImage(image.pixels.copy())
    keep_h = int(_round_half_up(np.float64(image.height * keep_fraction)))
    keep_w = int(_round_half_up(np.float64(image.width * keep_fraction)))
    if keep_h < 1 or keep_w < 1:
        raise ValueError("crop window would be empty")
    top = (image.height - keep_h) // 2
    left = (image.width - keep_w) // 2
    window = PixelImage(np.ascontiguousarray(
        image.pixels[top:top + keep_h, left:left + keep_w]))
    return resize_bilinear(window, image.width, image.height)


def apply_op(op: AugmentOp, image: PixelImage, seed=0) -> PixelImage:
    if op.kind == "rotate90":
        return rotate90(image)
    if op.kind == "gaussian_noise":
        return gaussian_noise(image, op.amount, op.strength, seed)
    if op.kind == "darken":
        return adjust_brightness(image, 1.0 - op.amount)
    if op.kind == "exposure":
        return adjust_brightness(image, op.factor)
    if op.kind == "blur":
        return box_blur(image, op.radius)
    if op.kind == "crop":
        return center_crop(image, op.fraction)
    raise ValueError(f"unknown augment kind {op.kind!r}")


@dataclass
class AugmentPlan:
    """Per-class output multiplicity plus the transform cycle that generates
    the extra copies (round-robin)."""

    per_class_multiplicity: dict[str, int]
    per_class_copies: dict[str, int]  # exact generated-copy counts
    transform_cycle: tuple[AugmentOp, ...] = TRAIN_CYCLE

    def output_count(self, label: str, input_count: int) -> int:
        return input_count + self.per_class_copies.get(label, 0)


def plan_augmentation(train_counts: dict[str, int],
                      target_counts: dict[str, int] | None = None,
                      cycle: tuple[AugmentOp, ...] = TRAIN_CYCLE) -> AugmentPlan:
    """Build the per-class multiplication plan.

    Without targets, the default multiplicities are benign x3 and
    malignant x4. With a target count T for a class of n originals,
    k = ceil(T / n) and exactly T - n copies are generated (the final
    round-robin cycle truncated).
    """
    if any(n <= 0 for n in train_counts.values()):
        raise ValueError("class counts must be positive")
    multiplicity: dict[str, int] = {}
    copies: dict[str, int] = {}
    for label, n in train_counts.items():
        if target_counts is not None and label in target_counts:
            target = target_counts[label]
            if target < n:
                raise ValueError(f"target {target} below original count {n} for {label}")
            multiplicity[label] = math.ceil(target / n)
            copies[label] = target - n
        else:
            multiplicity[label] = DEFAULT_MULTIPLICITY.get(label, 1)
            copies[label] = (multiplicity[label] - 1) * n
    if any(c > 0 for c in copies.values()) and not cycle:
        raise ValueError("a nonempty transform cycle is required to generate copies")
    return AugmentPlan(per_class_multiplicity=multiplicity,
                       per_class_copies=copies,
                       transform_cycle=tuple(cycle))


def apply_plan(manifest: DatasetManifest, split: SplitPlan, plan: AugmentPlan,
               seed: int, out_dir) -> DatasetManifest:
    """Generate the planned copies for the train side of the split.

    Originals are retained; the test side is never augmented. Generated
    images land under ``<out_dir>/aug/<class>/<origstem>_<k>.png`` and the
    returned manifest (also written to ``<out_dir>/train_manifest.json``)
    lists originals plus copies with ``source: augmented`` metadata.
    Deterministic for a fixed (split, plan, seed).
    """
    out_dir = Path(out_dir)
    records: list[SampleRecord] = [manifest.records[i] for i in split.train]
    derived: list[SampleRecord] = list(records)
    cycle = plan.transform_cycle

    by_class: dict[str, list[tuple[int, SampleRecord]]] = {}
    for idx, rec in zip(split.train, records):
        by_class.setdefault(rec.label, []).append((idx, rec))

    for label, members in by_class.items():
        remaining = plan.per_class_copies.get(label, 0)
        copy_round = 0
        while remaining > 0:
            copy_round += 1
            op = cycle[(copy_round - 1) % len(cycle)]
            for rec_idx, rec in members:
                if remaining == 0:
                    break
                base = resize_bilinear(load_image(rec.path),
                                       manifest.expected_width,
                                       manifest.expected_height)
                derived_seed = np.random.SeedSequence([seed, rec_idx, copy_round])
                image = apply_op(op, base, seed=derived_seed)
                stem = Path(rec.path).stem
                rel = Path("aug") / label / f"{stem}_{copy_round}.png"
                save_image(image, out_dir / rel)
                metadata = dict(rec.metadata)
                metadata["source"] = "augmented"
                derived.append(SampleRecord(path=out_dir / rel, label=label,
                                            metadata=metadata))
                remaining -= 1

    result = DatasetManifest(records=derived,
                             expected_width=manifest.expected_width,
                             expected_height=manifest.expected_height,
                             expected_channels=manifest.expected_channels)
    result.save(out_dir / "train_manifest.json")
    return result
