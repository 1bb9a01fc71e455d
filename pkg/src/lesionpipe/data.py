"""Dataset ingestion: image decoding, resizing, normalization, stratified
splitting, and statistical profiling.

Manifests are UTF-8 JSON documents of the form::

    {"expected": {"width": 224, "height": 224, "channels": 3},
     "records": [{"path": "img/a.png", "label": "benign", "metadata": {...}}]}

Record paths are resolved relative to the manifest's directory.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

LABEL_BENIGN = "benign"
LABEL_MALIGNANT = "malignant"
LABELS = (LABEL_BENIGN, LABEL_MALIGNANT)
LABEL_VALUES = {LABEL_BENIGN: 0, LABEL_MALIGNANT: 1}

KNOWN_METADATA_KEYS = {"sex", "age_band", "anatomical_site", "skin_tone", "source"}


class ManifestError(ValueError):
    """Raised when a dataset manifest is missing or malformed."""


class UnknownLabelError(ManifestError):
    """Raised when a record carries a label outside {benign, malignant}."""


def _round_half_up(values: np.ndarray) -> np.ndarray:
    # np.round is banker's rounding; pixel math is specified as half-up.
    return np.floor(values + 0.5)


@dataclass(frozen=True)
class PixelImage:
    """An 8-bit image, shape (height, width, channels), channels 1 or 3."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W, 1|3) pixel array, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"pixel data must be uint8, got {p.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @classmethod
    def from_array(cls, arr) -> "PixelImage":
        a = np.asarray(arr)
        if a.ndim == 2:
            a = a[:, :, None]
        return cls(np.ascontiguousarray(a, dtype=np.uint8))


@dataclass(frozen=True)
class FeatureTensor:
    """Normalized real-valued tensor, shape (channels, height, width)."""

    array: np.ndarray
    mode: str  # "unit" -> [0, 1], "symmetric" -> [-1, 1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.array.shape)


@dataclass
class SampleRecord:
    path: Path
    label: str
    metadata: dict = field(default_factory=dict)


@dataclass
class DatasetManifest:
    records: list[SampleRecord]
    expected_width: int = 224
    expected_height: int = 224
    expected_channels: int = 3

    def __len__(self) -> int:
        return len(self.records)

    def class_counts(self) -> dict[str, int]:
        counts = {label: 0 for label in LABELS}
        for rec in self.records:
            counts[rec.label] += 1
        return counts

    def by_class(self, label: str) -> list[int]:
        return [i for i, rec in enumerate(self.records) if rec.label == label]

    def to_dict(self, base_dir: Path | None = None) -> dict:
        records = []
        for rec in self.records:
            path = rec.path
            if base_dir is not None:
                try:
                    path = path.relative_to(base_dir)
                except ValueError:
                    path = Path(Path(path).resolve())
            entry = {"path": str(path), "label": rec.label}
            if rec.metadata:
                entry["metadata"] = rec.metadata
            records.append(entry)
        return {
            "expected": {
                "width": self.expected_width,
                "height": self.expected_height,
                "channels": self.expected_channels,
            },
            "records": records,
        }

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(base_dir=path.parent), indent=1),
                        encoding="utf-8")

    def digest(self) -> str:
        """Content hash over labels and resolved record paths."""
        import hashlib

        h = hashlib.sha256()
        h.update(f"{self.expected_width}x{self.expected_height}x{self.expected_channels}".encode())
        for rec in self.records:
            h.update(str(rec.path).encode())
            h.update(rec.label.encode())
        return h.hexdigest()


@dataclass
class SplitPlan:
    train: list[int]
    test: list[int]
    train_fraction: float
    seed: int


@dataclass
class DatasetProfile:
    """Reference statistics for downstream value-skew checks.

    Means/stds are over unit-normalized pixels, one entry per channel.
    """

    per_channel_mean: tuple[float, ...]
    per_channel_std: tuple[float, ...]
    class_ratio: float  # benign count / malignant count
    count: int

    def to_dict(self) -> dict:
        return {
            "per_channel_mean": list(self.per_channel_mean),
            "per_channel_std": list(self.per_channel_std),
            "class_ratio": self.class_ratio,
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetProfile":
        return cls(
            per_channel_mean=tuple(d["per_channel_mean"]),
            per_channel_std=tuple(d["per_channel_std"]),
            class_ratio=float(d["class_ratio"]),
            count=int(d["count"]),
        )

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "DatasetProfile":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_manifest(path) -> DatasetManifest:
    """Parse a manifest file; rejects unknown labels rather than defaulting."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"manifest unreadable: {exc}") from exc
    if not isinstance(doc, dict) or "records" not in doc:
        raise ManifestError("manifest must be an object with a 'records' list")

    expected = doc.get("expected", {})
    base = path.parent
    records = []
    for i, raw in enumerate(doc["records"]):
        if not isinstance(raw, dict) or "path" not in raw or "label" not in raw:
            raise ManifestError(f"record {i}: needs 'path' and 'label'")
        label = raw["label"]
        if label not in LABEL_VALUES:
            raise UnknownLabelError(f"record {i}: unknown label {label!r}")
        metadata = raw.get("metadata", {})
        if not isinstance(metadata, dict):
            raise ManifestError(f"record {i}: metadata must be an object")
        rec_path = Path(raw["path"])
        if not rec_path.is_absolute():
            rec_path = base / rec_path
        records.append(SampleRecord(path=rec_path, label=label, metadata=metadata))

    return DatasetManifest(
        records=records,
        expected_width=int(expected.get("width", 224)),
        expected_height=int(expected.get("height", 224)),
        expected_channels=int(expected.get("channels", 3)),
    )


def load_image(path) -> PixelImage:
    """Decode a PNG or JPEG file to 8-bit RGB."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        return PixelImage(np.asarray(rgb, dtype=np.uint8))


def save_image(image: PixelImage, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = image.pixels[:, :, 0] if image.channels == 1 else image.pixels
    Image.fromarray(arr).save(path, format="PNG")


def resize_bilinear(image: PixelImage, target_w: int, target_h: int) -> PixelImage:
    """Bilinear resize with corner-aligned sampling and half-up rounding.

    A target dimension of 1 samples the source center, where corner
    alignment degenerates.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    h, w = image.height, image.width
    if target_w == w and target_h == h:
        return PixelImage(image.pixels.copy())

    src = image.pixels.astype(np.float64)

    def sample_coords(n_src: int, n_dst: int) -> np.ndarray:
        if n_dst == 1:
            return np.array([(n_src - 1) / 2.0])
        return np.arange(n_dst) * (n_src - 1) / (n_dst - 1)

    ys = sample_coords(h, target_h)
    xs = sample_coords(w, target_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]

    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    out = np.clip(_round_half_up(out), 0, 255).astype(np.uint8)
    return PixelImage(out)


def normalize(image: PixelImage, mode: str = "unit",
              replicate_gray: bool = True) -> FeatureTensor:
    """Map 8-bit pixels to [0,1] ("unit") or [-1,1] ("symmetric"), CHW layout.

    Single-channel images are replicated to 3 channels by default since the
    network configs expect a fixed channel count.
    """
    if mode not in ("unit", "symmetric"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    arr = image.pixels.astype(np.float32) / 255.0
    if mode == "symmetric":
        arr = arr * 2.0 - 1.0
    chw = np.transpose(arr, (2, 0, 1))
    if replicate_gray and chw.shape[0] == 1:
        chw = np.repeat(chw, 3, axis=0)
    return FeatureTensor(np.ascontiguousarray(chw), mode)


def denormalize(tensor: FeatureTensor) -> PixelImage:
    """Inverse of :func:`normalize` (up to grayscale replication)."""
    arr = tensor.array
    if tensor.mode == "symmetric":
        arr = (arr + 1.0) / 2.0
    hwc = np.transpose(arr * 255.0, (1, 2, 0))
    return PixelImage(np.clip(_round_half_up(hwc.astype(np.float64)), 0, 255).astype(np.uint8))


def stratified_split(manifest: DatasetManifest, train_fraction: float,
                     seed: int) -> SplitPlan:
    """Per-class seeded shuffle; floor(fraction * n) to train, rest to test."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    counts = manifest.class_counts()
    if any(counts[label] == 0 for label in LABELS):
        raise ValueError("stratified split needs both classes present")

    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for label in LABELS:
        idxs = np.array(manifest.by_class(label))
        perm = rng.permutation(idxs)
        k = math.floor(train_fraction * len(idxs))
        train.extend(int(i) for i in perm[:k])
        test.extend(int(i) for i in perm[k:])
    return SplitPlan(train=sorted(train), test=sorted(test),
                     train_fraction=train_fraction, seed=seed)


def profile_dataset(manifest: DatasetManifest) -> DatasetProfile:
    """Per-channel mean/std over unit-normalized pixels plus the class ratio.

    Accumulates sums and sums of squares so that aggregation order does not
    affect the result.
    """
    if len(manifest) == 0:
        raise ValueError("cannot profile an empty manifest")
    total = np.zeros(3, dtype=np.float64)
    total_sq = np.zeros(3, dtype=np.float64)
    n_pixels = 0
    for rec in manifest.records:
        tensor = normalize(load_image(rec.path), "unit").array.astype(np.float64)
        total += tensor.sum(axis=(1, 2))
        total_sq += (tensor ** 2).sum(axis=(1, 2))
        n_pixels += tensor.shape[1] * tensor.shape[2]

    mean = total / n_pixels
    var = np.maximum(total_sq / n_pixels - mean ** 2, 0.0)
    counts = manifest.class_counts()
    if counts[LABEL_MALIGNANT] == 0 or counts[LABEL_BENIGN] == 0:
        raise ValueError("class ratio undefined: both classes must be present")
    ratio = counts[LABEL_BENIGN] / counts[LABEL_MALIGNANT]
    return DatasetProfile(
        per_channel_mean=tuple(float(m) for m in mean),
        per_channel_std=tuple(float(s) for s in np.sqrt(var)),
        class_ratio=ratio,
        count=len(manifest),
    )
