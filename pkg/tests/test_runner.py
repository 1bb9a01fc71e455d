import json

import numpy as np
import pytest
from PIL import Image

from lesionpipe.config import (
    AugmentSettings,
    PipelineConfig,
    TrainSettings,
)
from lesionpipe.pipeline import PipelineState, Registry, run_pipeline
from lesionpipe.pipeline.validation import MEAN_DRIFT
from lesionpipe.synthetic import write_blob_dataset


def make_config(tmp_path, manifest_path, epochs=4):
    return PipelineConfig(
        data_dir=tmp_path / "state",
        manifest=str(manifest_path),
        train=TrainSettings(arch="small", input_shape=(3, 16, 16),
                            train_fraction=0.8, epochs=epochs, batch_size=16,
                            lr=3e-3),
        augment=AugmentSettings(enabled=True, seed=0),
    )


@pytest.fixture
def dataset(tmp_path):
    return write_blob_dataset(tmp_path / "data", n_benign=24, n_malignant=24,
                              seed=3, size=16)


class TestHappyPath:
    def test_full_run_promotes(self, tmp_path, dataset):
        cfg = make_config(tmp_path, dataset)
        registry = Registry(cfg.data_dir / "registry")
        state = PipelineState()
        report = run_pipeline(cfg, registry, state, trigger_reason="manual")
        assert report.aborted_at is None, report.to_dict()
        assert report.accepted, report.gate_reasons
        assert registry.production().version_id == report.version_id
        stage_names = [s.name for s in report.stages]
        assert stage_names == ["schema_validation", "value_validation",
                               "augmentation", "training", "evaluation",
                               "gate", "registration"]

    def test_watermark_updated(self, tmp_path, dataset):
        cfg = make_config(tmp_path, dataset)
        registry = Registry(cfg.data_dir / "registry")
        state = PipelineState()
        run_pipeline(cfg, registry, state)
        assert state.dataset_size_at_last_train == 48
        assert state.last_train_time is not None
        assert (cfg.data_dir / "reference_profile.json").is_file()

    def test_report_written(self, tmp_path, dataset):
        cfg = make_config(tmp_path, dataset)
        registry = Registry(cfg.data_dir / "registry")
        report = run_pipeline(cfg, registry, PipelineState())
        on_disk = json.loads(
            (cfg.data_dir / "runs" / f"{report.run_id}.json").read_text())
        assert on_disk["accepted"] is True
        assert on_disk["version_id"] == report.version_id

    def test_hot_swap_callback_invoked(self, tmp_path, dataset):
        cfg = make_config(tmp_path, dataset)
        registry = Registry(cfg.data_dir / "registry")
        swapped = []
        run_pipeline(cfg, registry, PipelineState(),
                     hot_swap=lambda vid, params, net: swapped.append(vid))
        assert swapped == [registry.production().version_id]


class TestAborts:
    def test_schema_finding_aborts_before_training(self, tmp_path, dataset):
        rgba = Image.new("RGBA", (16, 16), (10, 10, 10, 100))
        rgba.save(tmp_path / "data" / "benign" / "b00000.png")
        cfg = make_config(tmp_path, dataset)
        registry = Registry(cfg.data_dir / "registry")
        report = run_pipeline(cfg, registry, PipelineState())
        assert report.aborted_at == "schema_validation"
        statuses = {s.name: s.status for s in report.stages}
        assert statuses["training"] == "skipped"
        assert registry.production() is None

    def test_value_skew_aborts(self, tmp_path, dataset):
        cfg = make_config(tmp_path, dataset)
        # plant a reference profile far from the candidate's statistics
        cfg.data_dir.mkdir(parents=True, exist_ok=True)
        (cfg.data_dir / "reference_profile.json").write_text(json.dumps({
            "per_channel_mean": [0.05, 0.05, 0.05],
            "per_channel_std": [0.2, 0.2, 0.2],
            "class_ratio": 1.0, "count": 48}))
        registry = Registry(cfg.data_dir / "registry")
        report = run_pipeline(cfg, registry, PipelineState())
        assert report.aborted_at == "value_validation"
        failed = next(s for s in report.stages if s.name == "value_validation")
        assert MEAN_DRIFT in failed.detail

    def test_watermark_untouched_on_abort(self, tmp_path, dataset):
        (tmp_path / "data" / "benign" / "b00000.png").write_bytes(b"junk")
        cfg = make_config(tmp_path, dataset)
        state = PipelineState(current_dataset_size=48)
        run_pipeline(cfg, Registry(cfg.data_dir / "registry"), state)
        assert state.last_train_time is None
        assert state.dataset_size_at_last_train == 0


class TestWarmStart:
    def test_fine_tune_keeps_frozen_incumbent_features(self, tmp_path, dataset):
        from lesionpipe.nn import load_weights

        cfg = make_config(tmp_path, dataset, epochs=5)
        registry = Registry(cfg.data_dir / "registry")
        first = run_pipeline(cfg, registry, PipelineState())
        assert first.accepted
        incumbent = registry.production()
        inc_params, _ = load_weights(incumbent.weights_path)

        cfg.train.warm_start = True
        cfg.train.freeze_boundary = 1  # convs frozen, head retrained
        cfg.train.epochs = 2
        second = run_pipeline(cfg, registry, PipelineState())
        assert second.aborted_at is None
        cand_params, cand_cfg = load_weights(
            registry.get(second.version_id).weights_path)
        assert cand_cfg.freeze_boundary == 1
        for frozen_idx in (0, 1):
            assert cand_params.entries[frozen_idx].weight.tobytes() == \
                inc_params.entries[frozen_idx].weight.tobytes()
        assert cand_params.entries[-1].weight.tobytes() != \
            inc_params.entries[-1].weight.tobytes()


class TestGateRejection:
    def test_rejected_candidate_stays_staged(self, tmp_path, dataset):
        cfg = make_config(tmp_path, dataset, epochs=6)
        registry = Registry(cfg.data_dir / "registry")
        first = run_pipeline(cfg, registry, PipelineState())
        assert first.accepted
        incumbent_id = registry.production().version_id

        # a one-epoch retrain at tiny lr cannot beat the incumbent
        cfg.train.epochs = 1
        cfg.train.lr = 1e-6
        cfg.train.init_seed = 99
        second = run_pipeline(cfg, registry, PipelineState())
        assert second.accepted is False
        assert registry.production().version_id == incumbent_id
        assert registry.get(second.version_id).stage == "staging"
