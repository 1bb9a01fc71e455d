"""Data validation ahead of retraining: schema skew (structure of the
incoming manifest and its images) and value skew (statistical drift
against a reference profile). Failures are findings, not exceptions; the
pipeline only proceeds when a report passes."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from ..data import DatasetProfile, LABEL_VALUES

# finding codes
DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
CHANNEL_MISMATCH = "CHANNEL_MISMATCH"
UNREADABLE_FILE = "UNREADABLE_FILE"
PIXEL_RANGE = "PIXEL_RANGE"
LABEL_DOMAIN = "LABEL_DOMAIN"
METADATA_TYPE = "METADATA_TYPE"
MANIFEST_PARSE = "MANIFEST_PARSE"
MEAN_DRIFT = "MEAN_DRIFT"
STD_DRIFT = "STD_DRIFT"
CLASS_RATIO_DRIFT = "CLASS_RATIO_DRIFT"

# PIL modes whose samples exceed 8 bits
_WIDE_MODES = {"I", "I;16", "I;16L", "I;16B", "I;16N", "F"}
_MODE_CHANNELS = {"1": 1, "L": 1, "P": 1, "RGB": 3, "YCbCr": 3,
                  "RGBA": 4, "CMYK": 4, "LA": 2, "PA": 2}


@dataclass(frozen=True)
class Finding:
    code: str
    detail: str

    def to_dict(self) -> dict:
        return {"code": self.code, "detail": self.detail}


@dataclass
class SkewReport:
    kind: str  # "schema" | "value"
    findings: list[Finding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.findings

    def codes(self) -> set[str]:
        return {f.code for f in self.findings}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed,
                "findings": [f.to_dict() for f in self.findings]}


@dataclass
class SchemaExpectations:
    width: int = 224
    height: int = 224
    channels: int = 3
    labels: tuple[str, ...] = tuple(LABEL_VALUES)
    strict_dims: bool = False  # sources are resized downstream by default


@dataclass
class SkewThresholds:
    mean_tolerance: float = 0.10        # normalized units, per channel
    std_tolerance: float = 0.10
    class_ratio_tolerance: float = 0.25  # relative change

    @classmethod
    def from_dict(cls, d: dict) -> "SkewThresholds":
        return cls(**{k: d[k] for k in
                      ("mean_tolerance", "std_tolerance", "class_ratio_tolerance")
                      if k in d})


_SCALAR_TYPES = (str, int, float, bool, type(None))


def validate_schema(manifest_path, expectations: SchemaExpectations | None = None
                    ) -> SkewReport:
    """Inspect the raw manifest and its image files without going through
    the strict loader, so label-domain and type problems become findings
    rather than parse errors."""
    report = SkewReport(kind="schema")
    path = Path(manifest_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        report.findings.append(Finding(MANIFEST_PARSE, str(exc)))
        return report

    expected_block = doc.get("expected", {})
    if expectations is None:
        expectations = SchemaExpectations(
            width=int(expected_block.get("width", 224)),
            height=int(expected_block.get("height", 224)),
            channels=int(expected_block.get("channels", 3)))

    for i, rec in enumerate(doc.get("records", [])):
        label = rec.get("label")
        if label not in expectations.labels:
            report.findings.append(Finding(
                LABEL_DOMAIN, f"record {i}: label {label!r} outside "
                f"{sorted(expectations.labels)}"))
        metadata = rec.get("metadata", {})
        if isinstance(metadata, dict):
            for key, value in metadata.items():
                if not isinstance(value, _SCALAR_TYPES):
                    report.findings.append(Finding(
                        METADATA_TYPE,
                        f"record {i}: metadata {key!r} has non-scalar type "
                        f"{type(value).__name__}"))
        else:
            report.findings.append(Finding(
                METADATA_TYPE, f"record {i}: metadata is not an object"))

        rec_path = Path(rec.get("path", ""))
        if not rec_path.is_absolute():
            rec_path = path.parent / rec_path
        report.findings.extend(_inspect_image(rec_path, i, expectations))
    return report


def _inspect_image(rec_path: Path, index: int,
                   exp: SchemaExpectations) -> list[Finding]:
    findings: list[Finding] = []
    try:
        with Image.open(rec_path) as im:
            im.load()
            mode, size = im.mode, im.size
            extrema = im.getextrema()
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        return [Finding(UNREADABLE_FILE, f"record {index}: {rec_path}: {exc}")]

    channels = _MODE_CHANNELS.get(mode)
    if mode in _WIDE_MODES:
        lo, hi = extrema if not isinstance(extrema[0], tuple) else (
            min(e[0] for e in extrema), max(e[1] for e in extrema))
        if hi > 255 or lo < 0:
            findings.append(Finding(
                PIXEL_RANGE, f"record {index}: {mode} sample range "
                f"[{lo}, {hi}] exceeds 8-bit"))
    elif channels is not None and channels > exp.channels:
        # extra channels (alpha, CMYK) cannot round-trip through 8-bit RGB;
        # grayscale is fine since it replicates losslessly
        findings.append(Finding(
            CHANNEL_MISMATCH, f"record {index}: {channels}-channel image "
            f"({mode}), expected {exp.channels}"))

    if size[0] < 1 or size[1] < 1:
        findings.append(Finding(
            DIMENSION_MISMATCH, f"record {index}: degenerate size {size}"))
    elif exp.strict_dims and size != (exp.width, exp.height):
        findings.append(Finding(
            DIMENSION_MISMATCH, f"record {index}: size {size} != "
            f"expected {(exp.width, exp.height)}"))
    return findings


def validate_values(candidate: DatasetProfile, reference: DatasetProfile,
                    thresholds: SkewThresholds | None = None) -> SkewReport:
    """Flag per-channel mean/std drift beyond tolerance and relative
    class-ratio changes beyond tolerance."""
    thresholds = thresholds or SkewThresholds()
    report = SkewReport(kind="value")
    for ch, (cand, ref) in enumerate(zip(candidate.per_channel_mean,
                                         reference.per_channel_mean)):
        if abs(cand - ref) > thresholds.mean_tolerance:
            report.findings.append(Finding(
                MEAN_DRIFT, f"channel {ch}: mean {cand:.4f} vs reference "
                f"{ref:.4f} (tolerance {thresholds.mean_tolerance})"))
    for ch, (cand, ref) in enumerate(zip(candidate.per_channel_std,
                                         reference.per_channel_std)):
        if abs(cand - ref) > thresholds.std_tolerance:
            report.findings.append(Finding(
                STD_DRIFT, f"channel {ch}: std {cand:.4f} vs reference "
                f"{ref:.4f} (tolerance {thresholds.std_tolerance})"))

    ref_ratio = reference.class_ratio
    cand_ratio = candidate.class_ratio
    if not math.isfinite(cand_ratio) or not math.isfinite(ref_ratio):
        relative = math.inf if cand_ratio != ref_ratio else 0.0
    else:
        relative = abs(cand_ratio - ref_ratio) / ref_ratio
    if relative > thresholds.class_ratio_tolerance:
        report.findings.append(Finding(
            CLASS_RATIO_DRIFT, f"class ratio {cand_ratio:.3f} vs reference "
            f"{ref_ratio:.3f} ({relative:+.1%} relative change)"))
    return report
