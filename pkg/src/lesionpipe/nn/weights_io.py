"""Bit-exact weight file serialization.

Layout (little-endian throughout)::

    magic "MELW" | u32 format version | u32 layer count
    per parameterized layer:
        u16 name length | UTF-8 name
        weight entry: u8 rank | u32 dims... | raw f32 tensor data
        bias entry:   u8 rank | u32 dims... | raw f32 tensor data
    u64 total file byte length (including these 8 bytes)

A JSON sidecar at ``<path>.config.json`` carries the network config so a
weight file can be loaded stand-alone; loading against an explicit config
validates layer count and tensor shapes instead.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .config import NetworkConfig
from .network import LayerParams, ParameterSet

MAGIC = b"MELW"
FORMAT_VERSION = 1


class WeightFormatError(ValueError):
    """Base class for weight file failures."""


class BadMagicError(WeightFormatError):
    pass


class VersionMismatchError(WeightFormatError):
    pass


class TruncatedTensorError(WeightFormatError):
    pass


class ConfigMismatchError(WeightFormatError):
    pass


def _pack_tensor(tensor: np.ndarray) -> bytes:
    data = np.ascontiguousarray(tensor, dtype="<f4")
    parts = [struct.pack("<B", data.ndim)]
    parts += [struct.pack("<I", d) for d in data.shape]
    parts.append(data.tobytes())
    return b"".join(parts)


def save_weights(params: ParameterSet, config: NetworkConfig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = [MAGIC, struct.pack("<I", FORMAT_VERSION),
            struct.pack("<I", len(params.entries))]
    for entry in params.entries:
        name = entry.name.encode("utf-8")
        body.append(struct.pack("<H", len(name)))
        body.append(name)
        body.append(_pack_tensor(entry.weight))
        body.append(_pack_tensor(entry.bias))
    payload = b"".join(body)
    total = len(payload) + 8
    path.write_bytes(payload + struct.pack("<Q", total))
    sidecar = path.with_suffix(path.suffix + ".config.json")
    sidecar.write_text(json.dumps(config.to_dict(), indent=1), encoding="utf-8")


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedTensorError(
                f"file ends at byte {len(self.blob)}, needed {self.pos + n}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def _read_tensor(r: _Reader) -> np.ndarray:
    rank = r.u8()
    shape = tuple(r.u32() for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    raw = r.take(4 * count)
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def load_weights(path, config: NetworkConfig | None = None
                 ) -> tuple[ParameterSet, NetworkConfig]:
    """Round-trips what save_weights wrote; verifies the trailer length,
    magic, version, and (when a config is supplied or found in the sidecar)
    the layer count and tensor shapes."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 8:
        raise TruncatedTensorError("file shorter than its length trailer")
    declared = struct.unpack("<Q", blob[-8:])[0]
    if declared != len(blob):
        raise TruncatedTensorError(
            f"trailer declares {declared} bytes, file has {len(blob)}")

    r = _Reader(blob[:-8])
    if r.take(4) != MAGIC:
        raise BadMagicError("not a MELW weight file")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version}, expected {FORMAT_VERSION}")
    count = r.u32()
    entries = []
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8")
        weight = _read_tensor(r)
        bias = _read_tensor(r)
        entries.append(LayerParams(name, weight, bias))
    params = ParameterSet(entries)

    if config is None:
        sidecar = path.with_suffix(path.suffix + ".config.json")
        if not sidecar.is_file():
            raise ConfigMismatchError(
                "no config supplied and no config sidecar next to the weight file")
        config = NetworkConfig.from_dict(json.loads(sidecar.read_text(encoding="utf-8")))

    _check_against_config(params, config)
    return params, config


def _check_against_config(params: ParameterSet, config: NetworkConfig) -> None:
    from .network import build_network

    expected = build_network(config, init_seed=0)
    if len(expected.entries) != len(params.entries):
        raise ConfigMismatchError(
            f"file has {len(params.entries)} parameterized layers, "
            f"config expects {len(expected.entries)}")
    for got, want in zip(params.entries, expected.entries):
        if got.weight.shape != want.weight.shape or got.bias.shape != want.bias.shape:
            raise ConfigMismatchError(
                f"layer {got.name}: tensor shapes {got.weight.shape}/{got.bias.shape} "
                f"do not match config {want.weight.shape}/{want.bias.shape}")
