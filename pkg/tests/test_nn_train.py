import numpy as np
import pytest

from lesionpipe.nn import (
    Adam,
    NetworkConfig,
    Sgd,
    TrainConfig,
    build_network,
    dense,
    flatten,
    forward,
    relu,
    sigmoid,
    train,
)
from lesionpipe.nn.network import Gradients
from tests_nn_util import separable_2d, toy_conv_config


class TestOptimizers:
    def _single_param(self, value=1.0):
        cfg = NetworkConfig(input_shape=(1, 1, 1),
                            layers=[flatten(), dense(1), sigmoid()])
        params = build_network(cfg, 0)
        params.entries[0].weight[:] = value
        return cfg, params

    def test_sgd_step(self):
        cfg, params = self._single_param(1.0)
        opt = Sgd(cfg, lr=0.1)
        grads = Gradients([(np.array([[0.5]], dtype=np.float32),
                            np.zeros(1, dtype=np.float32))])
        opt.step(params, grads)
        assert params.entries[0].weight[0, 0] == pytest.approx(0.95)

    def test_zero_gradient_leaves_params(self):
        cfg, params = self._single_param(0.7)
        opt = Adam(cfg, lr=0.1)
        zero = Gradients([(np.zeros((1, 1), dtype=np.float32),
                           np.zeros(1, dtype=np.float32))])
        opt.step(params, zero)
        assert params.entries[0].weight[0, 0] == pytest.approx(0.7)

    def test_adam_first_step_magnitude(self):
        # bias-corrected first update is ~lr regardless of gradient size
        for g in (0.001, 0.5, 250.0):
            cfg, params = self._single_param(0.0)
            opt = Adam(cfg, lr=0.01)
            grads = Gradients([(np.array([[g]], dtype=np.float32),
                                np.zeros(1, dtype=np.float32))])
            opt.step(params, grads)
            assert abs(params.entries[0].weight[0, 0]) == pytest.approx(0.01, rel=1e-4)

    def test_moments_decay_under_zero_gradient(self):
        cfg, params = self._single_param(0.0)
        opt = Adam(cfg, lr=0.1, beta1=0.5, beta2=0.5)
        g1 = Gradients([(np.full((1, 1), 2.0, dtype=np.float32),
                         np.zeros(1, dtype=np.float32))])
        zero = Gradients([(np.zeros((1, 1), dtype=np.float32),
                           np.zeros(1, dtype=np.float32))])
        opt.step(params, g1)
        m_before = opt._moments[0][0].copy()
        opt.step(params, zero)
        assert np.all(np.abs(opt._moments[0][0]) < np.abs(m_before))

    def test_frozen_entries_untouched(self):
        cfg = NetworkConfig(input_shape=(2, 1, 1),
                            layers=[flatten(), dense(2), relu(), dense(1), sigmoid()],
                            freeze_boundary=0)
        params = build_network(cfg, 1)
        frozen_before = params.entries[0].weight.copy()
        opt = Adam(cfg, lr=0.5)
        grads = Gradients([
            (np.ones_like(params.entries[0].weight), np.ones_like(params.entries[0].bias)),
            (np.ones_like(params.entries[1].weight), np.ones_like(params.entries[1].bias)),
        ])
        opt.step(params, grads)
        assert np.array_equal(params.entries[0].weight, frozen_before)
        assert not np.allclose(params.entries[1].weight,
                               build_network(cfg, 1).entries[1].weight)


class TestTrain:
    def test_fully_frozen_net_never_changes(self):
        cfg = toy_conv_config()
        cfg.freeze_boundary = len(cfg.weighted_layers()) - 1
        params = build_network(cfg, 0)
        before = [e.weight.copy() for e in params.entries]
        x = np.random.default_rng(0).random((8,) + cfg.input_shape, dtype=np.float32)
        y = (np.arange(8) % 2).astype(np.float32)
        train(params, cfg, x, y, TrainConfig(epochs=3, batch_size=4))
        for e, b in zip(params.entries, before):
            assert e.weight.tobytes() == b.tobytes()

    def test_separable_2d_reaches_perfect_accuracy(self):
        cfg, x, y = separable_2d(n=60, seed=5)
        params = build_network(cfg, 2)
        hist = train(params, cfg, x, y,
                     TrainConfig(epochs=100, lr=0.05, batch_size=16, shuffle_seed=1))
        assert hist.epochs[-1].accuracy == 1.0

    def test_history_deterministic(self):
        cfg, x, y = separable_2d(n=40, seed=3)
        runs = []
        for _ in range(2):
            params = build_network(cfg, 9)
            hist = train(params, cfg, x, y,
                         TrainConfig(epochs=5, batch_size=8, shuffle_seed=4))
            runs.append([(e.loss, e.accuracy) for e in hist.epochs])
        assert runs[0] == runs[1]

    def test_one_entry_per_epoch(self):
        cfg, x, y = separable_2d(n=20, seed=1)
        params = build_network(cfg, 0)
        hist = train(params, cfg, x, y, TrainConfig(epochs=7, batch_size=10))
        assert len(hist.epochs) == 7

    def test_batch_size_validated(self):
        cfg, x, y = separable_2d(n=10, seed=1)
        params = build_network(cfg, 0)
        with pytest.raises(ValueError):
            train(params, cfg, x, y, TrainConfig(epochs=1, batch_size=11))

    def test_freeze_invariant_with_partial_freeze(self):
        cfg = toy_conv_config()
        cfg.freeze_boundary = 0  # first conv frozen, rest trainable
        params = build_network(cfg, 6)
        frozen_w = params.entries[0].weight.copy()
        frozen_b = params.entries[0].bias.copy()
        trainable_w = params.entries[-1].weight.copy()
        rng = np.random.default_rng(0)
        x = rng.random((16,) + cfg.input_shape, dtype=np.float32)
        y = (rng.random(16) > 0.5).astype(np.float32)
        train(params, cfg, x, y, TrainConfig(epochs=5, batch_size=8))
        assert params.entries[0].weight.tobytes() == frozen_w.tobytes()
        assert params.entries[0].bias.tobytes() == frozen_b.tobytes()
        assert params.entries[-1].weight.tobytes() != trainable_w.tobytes()
