"""Exploratory data analysis: per-class mean images, variance/std images,
and a colormapped difference heatmap between class means."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import PixelImage, _round_half_up, save_image

# Six-stop piecewise-linear rainbow colormap over [0, 1].
COLORMAP_STOPS = (
    (0.0, (255, 0, 255)),
    (0.2, (0, 0, 255)),
    (0.4, (0, 255, 255)),
    (0.6, (0, 255, 0)),
    (0.8, (255, 255, 0)),
    (1.0, (255, 0, 0)),
)

STAT_KINDS = ("mean", "variance", "std", "difference")


@dataclass(frozen=True)
class StatImage:
    """Real-valued per-pixel statistic; values are not clamped to [0, 255]."""

    values: np.ndarray  # float64, shape (height, width, channels)
    kind: str

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise ValueError(f"unknown stat kind {self.kind!r}")
        if self.values.ndim != 3:
            raise ValueError("stat image must be (H, W, C)")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _stack(images: list[PixelImage]) -> np.ndarray:
    shapes = {im.pixels.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"images must share dimensions, got {sorted(shapes)}")
    return np.stack([im.pixels.astype(np.float64) for im in images])


def class_mean_image(images: list[PixelImage]) -> StatImage:
    """Elementwise arithmetic mean over a class's images."""
    if not images:
        raise ValueError("need at least one image")
    return StatImage(_stack(images).mean(axis=0), "mean")


def class_dispersion_image(images: list[PixelImage]) -> tuple[StatImage, StatImage]:
    """Per-pixel population variance and standard deviation images."""
    if len(images) < 2:
        raise ValueError("dispersion needs at least two images")
    stack = _stack(images)
    variance = stack.var(axis=0)  # population (divide by n)
    return StatImage(variance, "variance"), StatImage(np.sqrt(variance), "std")


def apply_colormap(scaled: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] through the piecewise-linear colormap to RGB."""
    scaled = np.clip(scaled, 0.0, 1.0)
    out = np.zeros(scaled.shape + (3,), dtype=np.float64)
    for (t0, c0), (t1, c1) in zip(COLORMAP_STOPS, COLORMAP_STOPS[1:]):
        mask = (scaled >= t0) & (scaled <= t1)
        frac = np.zeros_like(scaled)
        frac[mask] = (scaled[mask] - t0) / (t1 - t0)
        for k in range(3):
            out[..., k] = np.where(mask, c0[k] + frac * (c1[k] - c0[k]), out[..., k])
    return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)


def scaled_difference(mean_a: StatImage, mean_b: StatImage) -> tuple[np.ndarray, float, float]:
    """Channel-averaged absolute difference, min-max scaled to [0, 1].

    Returns the scaled field plus the (min, max) used, for sidecar metadata.
    A zero-range field maps everywhere to 0 rather than erroring.
    """
    if mean_a.kind != "mean" or mean_b.kind != "mean":
        raise ValueError("difference heatmap expects two mean images")
    if mean_a.values.shape != mean_b.values.shape:
        raise ValueError("mean images must share dimensions")
    diff = np.abs(mean_a.values - mean_b.values).mean(axis=2)
    lo, hi = float(diff.min()), float(diff.max())
    if hi > lo:
        scaled = (diff - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(diff)
    return scaled, lo, hi


def difference_heatmap(mean_a: StatImage, mean_b: StatImage) -> PixelImage:
    """Rainbow heatmap of where the two class means differ most."""
    scaled, _, _ = scaled_difference(mean_a, mean_b)
    return PixelImage(apply_colormap(scaled))


def export_stat_image(stat: StatImage, path) -> None:
    """Write a StatImage as a min-max scaled PNG with a JSON sidecar
    recording the scaling bounds."""
    path = Path(path)
    lo, hi = float(stat.values.min()), float(stat.values.max())
    if hi > lo:
        scaled = (stat.values - lo) / (hi - lo) * 255.0
    else:
        scaled = np.zeros_like(stat.values)
    img = PixelImage(np.clip(_round_half_up(scaled), 0, 255).astype(np.uint8))
    save_image(img, path)
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps({"kind": stat.kind, "min": lo, "max": hi}))


def export_heatmap(mean_a: StatImage, mean_b: StatImage, path) -> PixelImage:
    """Write the difference heatmap PNG plus its scaling sidecar."""
    path = Path(path)
    scaled, lo, hi = scaled_difference(mean_a, mean_b)
    heatmap = PixelImage(apply_colormap(scaled))
    save_image(heatmap, path)
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps({"kind": "difference", "min": lo, "max": hi}))
    return heatmap
