import struct

import numpy as np
import pytest

from lesionpipe.nn import (
    BadMagicError,
    ConfigMismatchError,
    NetworkConfig,
    TruncatedTensorError,
    VersionMismatchError,
    build_network,
    dense,
    flatten,
    load_weights,
    save_weights,
    sigmoid,
)
from tests_nn_util import toy_conv_config


@pytest.fixture
def saved(tmp_path):
    cfg = toy_conv_config()
    params = build_network(cfg, 21)
    path = tmp_path / "model.melw"
    save_weights(params, cfg, path)
    return cfg, params, path


class TestRoundTrip:
    def test_bitwise_equal(self, saved):
        cfg, params, path = saved
        loaded, loaded_cfg = load_weights(path)
        assert loaded_cfg.layers == cfg.layers
        for a, b in zip(params.entries, loaded.entries):
            assert a.name == b.name
            assert a.weight.tobytes() == b.weight.tobytes()
            assert a.bias.tobytes() == b.bias.tobytes()

    def test_explicit_config_accepted(self, saved):
        cfg, _, path = saved
        loaded, _ = load_weights(path, cfg)
        assert len(loaded.entries) == len(cfg.weighted_layers())

    def test_freeze_boundary_round_trips(self, tmp_path):
        cfg = toy_conv_config()
        cfg.freeze_boundary = 2
        params = build_network(cfg, 0)
        save_weights(params, cfg, tmp_path / "w.melw")
        _, loaded_cfg = load_weights(tmp_path / "w.melw")
        assert loaded_cfg.freeze_boundary == 2


class TestCorruption:
    def test_truncated_file(self, saved):
        _, _, path = saved
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(TruncatedTensorError):
            load_weights(path)

    def test_trailer_mismatch(self, saved):
        _, _, path = saved
        blob = path.read_bytes()
        path.write_bytes(blob[:-8] + struct.pack("<Q", len(blob) + 99))
        with pytest.raises(TruncatedTensorError):
            load_weights(path)

    def test_bad_magic(self, saved):
        _, _, path = saved
        blob = path.read_bytes()
        path.write_bytes(b"XXXX" + blob[4:])
        with pytest.raises(BadMagicError):
            load_weights(path)

    def test_version_mismatch(self, saved):
        _, _, path = saved
        blob = path.read_bytes()
        path.write_bytes(blob[:4] + struct.pack("<I", 99) + blob[8:])
        with pytest.raises(VersionMismatchError):
            load_weights(path)

    def test_wrong_layer_count_config(self, saved):
        _, _, path = saved
        other = NetworkConfig(input_shape=(4, 1, 1),
                              layers=[flatten(), dense(1), sigmoid()])
        with pytest.raises(ConfigMismatchError):
            load_weights(path, other)

    def test_missing_sidecar_without_config(self, saved):
        _, _, path = saved
        path.with_suffix(path.suffix + ".config.json").unlink()
        with pytest.raises(ConfigMismatchError):
            load_weights(path)
