import json
from pathlib import Path

import numpy as np
import pytest

from lesionpipe.data import PixelImage, save_image


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1].removeprefix("test_")
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {outcome}", flush=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_image(arr) -> PixelImage:
    return PixelImage.from_array(arr)


def write_manifest(tmp_path: Path, records, expected=None, name="manifest.json") -> Path:
    """Write a manifest JSON plus its record images; records are
    (array, label, metadata) triples."""
    expected = expected or {"width": 8, "height": 8, "channels": 3}
    entries = []
    img_dir = tmp_path / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    for i, (arr, label, metadata) in enumerate(records):
        path = img_dir / f"{i:04d}.png"
        save_image(make_image(arr), path)
        entry = {"path": f"img/{i:04d}.png", "label": label}
        if metadata:
            entry["metadata"] = metadata
        entries.append(entry)
    doc = {"expected": expected, "records": entries}
    out = tmp_path / name
    out.write_text(json.dumps(doc))
    return out


def constant_rgb(value, w=8, h=8):
    return np.full((h, w, 3), value, dtype=np.uint8)
