"""Synthetic two-class lesion-blob datasets for desk-scale benchmarks and
integration tests.

Class identity is encoded the way the real classes separate visually:
malignant blobs are larger, have irregular borders, and denser (darker,
speckled) interiors than benign ones.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import DatasetManifest, PixelImage, save_image

STYLES = {
    # (background RGB, blob RGB)
    "lesion": ((205, 172, 150), (92, 58, 46)),
    "shifted": ((152, 162, 188), (58, 72, 50)),
}

METADATA_SEXES = ("f", "m")
METADATA_TONES = ("light", "dark")
METADATA_SITES = ("arm", "leg", "torso", "face")


def make_blob_image(rng: np.random.Generator, label: str, size: int = 32,
                    style: str = "lesion",
                    benign_radius: tuple[float, float] = (0.10, 0.16),
                    malignant_radius: tuple[float, float] = (0.22, 0.34),
                    noise: float = 4.0) -> PixelImage:
    """One lesion blob on a skin-toned background.

    Radius ranges are fractions of the image size; overlapping ranges plus
    higher noise make the discrimination harder.
    """
    bg, blob = STYLES[style]
    malignant = label == "malignant"

    if malignant:
        base_radius = rng.uniform(*malignant_radius) * size
        irregularity = 0.22
        density = rng.uniform(0.75, 1.0)
    else:
        base_radius = rng.uniform(*benign_radius) * size
        irregularity = 0.04
        density = rng.uniform(0.35, 0.6)

    cy = size / 2 + rng.uniform(-0.06, 0.06) * size
    cx = size / 2 + rng.uniform(-0.06, 0.06) * size
    yy, xx = np.mgrid[0:size, 0:size]
    dy, dx = yy - cy, xx - cx
    radius = np.hypot(dy, dx)
    theta = np.arctan2(dy, dx)

    boundary = np.full_like(radius, base_radius)
    for k in range(2, 5):
        boundary += base_radius * irregularity * rng.normal(0, 1.0 / k) \
            * np.sin(k * theta + rng.uniform(0, 2 * np.pi))

    edge = max(size * 0.04, 1.0)
    alpha = np.clip((boundary - radius) / edge, 0.0, 1.0)

    image = np.empty((size, size, 3), dtype=np.float64)
    blob_color = np.array(blob, dtype=np.float64) * (1.0 - 0.3 * density)
    for c in range(3):
        image[:, :, c] = bg[c] * (1 - alpha) + blob_color[c] * alpha
    if malignant:
        speckle = (rng.random((size, size)) < 0.25) * alpha
        image *= (1.0 - 0.35 * speckle)[:, :, None]
    image += rng.normal(0, noise, image.shape)
    return PixelImage(np.clip(np.floor(image + 0.5), 0, 255).astype(np.uint8))


def blob_batch(n_per_class: int, seed: int, size: int = 32,
               style: str = "lesion", **blob_kwargs
               ) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ready for the network: unit-normalized CHW float32 plus
    0/1 labels, benign first."""
    from .data import normalize

    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for label, y in (("benign", 0.0), ("malignant", 1.0)):
        for _ in range(n_per_class):
            img = make_blob_image(rng, label, size, style, **blob_kwargs)
            xs.append(normalize(img, "unit").array)
            ys.append(y)
    return np.stack(xs).astype(np.float32), np.asarray(ys, dtype=np.float32)


def write_blob_dataset(out_dir, n_benign: int, n_malignant: int, seed: int,
                       size: int = 32, style: str = "lesion",
                       with_metadata: bool = True) -> Path:
    """Write PNGs plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    records = []
    for label, count in (("benign", n_benign), ("malignant", n_malignant)):
        for i in range(count):
            img = make_blob_image(rng, label, size, style)
            rel = Path(label) / f"{label[0]}{i:05d}.png"
            save_image(img, out_dir / rel)
            entry = {"path": str(rel), "label": label}
            if with_metadata:
                entry["metadata"] = {
                    "sex": METADATA_SEXES[int(rng.integers(2))],
                    "skin_tone": METADATA_TONES[int(rng.integers(2))],
                    "anatomical_site": METADATA_SITES[int(rng.integers(4))],
                    "source": "archive",
                }
            records.append(entry)
    doc = {"expected": {"width": size, "height": size, "channels": 3},
           "records": records}
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return manifest_path
