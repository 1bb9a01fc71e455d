"""Gradient correctness against central finite differences.

The checker's numeric side runs in float64 with relu masks and pool
routing pinned to the unperturbed point, so the quotient measures the
smooth piece backprop differentiates (stepping eps=1e-3 across an
activation kink would invalidate the quotient, not the gradient).
"""
import numpy as np
import pytest

from lesionpipe.nn import (
    NetworkConfig,
    build_network,
    conv3x3,
    dense,
    flatten,
    gradient_check,
    maxpool2x2,
    relu,
    sigmoid,
)


def two_block_config(in_shape=(2, 16, 16)):
    return NetworkConfig(input_shape=in_shape, layers=[
        conv3x3(3), relu(), maxpool2x2(),
        conv3x3(3), relu(), maxpool2x2(),
        flatten(), dense(4), relu(), dense(1), sigmoid(),
    ])


def randomized_net(cfg, seed):
    rng = np.random.default_rng(seed + 10_000)
    params = build_network(cfg, seed)
    for e in params.entries:
        e.bias[:] = rng.normal(0, 0.1, e.bias.shape).astype(np.float32)
    x = rng.random((1,) + tuple(cfg.input_shape), dtype=np.float32)
    y = np.array([float(seed % 2)])
    return params, x, y


class TestGradientCheck:
    def test_scalar_linear_model(self):
        cfg = NetworkConfig(input_shape=(1, 1, 1),
                            layers=[flatten(), dense(1), sigmoid()])
        params = build_network(cfg, 1)
        params.entries[0].weight[:] = 0.4
        params.entries[0].bias[:] = -0.2
        x = np.full((1, 1, 1, 1), 0.7, dtype=np.float32)
        err = gradient_check(params, cfg, x, np.array([1.0]), "bce", 1e-3)
        assert err <= 1e-6

    @pytest.mark.parametrize("loss_kind", ["bce", "half_squared"])
    def test_two_block_toy_net(self, loss_kind):
        cfg = two_block_config()
        params, x, y = randomized_net(cfg, 42)
        err = gradient_check(params, cfg, x, y, loss_kind, 1e-3)
        assert err <= 1e-3

    def test_frozen_layers_also_checked(self):
        cfg = two_block_config()
        cfg.freeze_boundary = 2  # freezing is an optimizer concern, not a gradient one
        params, x, y = randomized_net(cfg, 7)
        err = gradient_check(params, cfg, x, y, "bce", 1e-3)
        assert err <= 1e-3

    def test_many_seeds_smaller_net(self):
        # quick sweep; the acceptance suite runs the full >=100-seed version
        cfg = NetworkConfig(input_shape=(1, 8, 8), layers=[
            conv3x3(2), relu(), maxpool2x2(),
            flatten(), dense(3), relu(), dense(1), sigmoid()])
        for seed in range(12):
            params, x, y = randomized_net(cfg, seed)
            kind = "bce" if seed % 2 == 0 else "half_squared"
            assert gradient_check(params, cfg, x, y, kind, 1e-3) <= 1e-3

    def test_unpinned_oracle_agrees_away_from_kinks(self):
        # with no relu/pool in the stack there is no routing to pin, so the
        # plain central difference must agree with the analytic gradient too
        cfg = NetworkConfig(input_shape=(1, 2, 2),
                            layers=[flatten(), dense(3), dense(1), sigmoid()])
        params = build_network(cfg, 9)
        x = np.random.default_rng(3).random((1, 1, 2, 2), dtype=np.float32)
        err = gradient_check(params, cfg, x, np.array([0.0]), "bce", 1e-3,
                             pin_routing=False)
        assert err <= 1e-6
