"""Acceptance suite: every criterion at its stated tolerance, one
pass/fail line each (printed by the conftest report hook)."""
import io
import json
import math
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from lesionpipe.augment import BIAS_CYCLE, plan_augmentation
from lesionpipe.config import AugmentSettings, PipelineConfig, TrainSettings
from lesionpipe.data import DatasetManifest, SampleRecord, stratified_split
from lesionpipe.metrics import auc, evaluate, f1_score, roc_curve
from lesionpipe.nn import (
    NetworkConfig,
    TrainConfig,
    build_network,
    conv3x3,
    dense,
    flatten,
    forward,
    gradient_check,
    maxpool2x2,
    relu,
    save_weights,
    sigmoid,
    small_config,
    train,
)
from lesionpipe.pipeline import (
    CHANNEL_MISMATCH,
    CLASS_RATIO_DRIFT,
    LABEL_DOMAIN,
    MEAN_DRIFT,
    PIXEL_RANGE,
    STD_DRIFT,
    FeedbackRecord,
    IllegalTransitionError,
    PipelineState,
    Registry,
    TriggerConfig,
    UnknownVersionError,
    check_triggers,
    run_pipeline,
)
from lesionpipe.serve import ModelSnapshot, create_app
from lesionpipe.synthetic import blob_batch, make_blob_image, write_blob_dataset

from test_metrics import mann_whitney_auc
from test_registry_gate import report as make_report
from test_triggers import T0, feedback, state


# -- instant bookkeeping criteria -------------------------------------------

def test_f1_reproduction():
    assert f1_score(0.93, 0.947) == pytest.approx(0.938423, abs=1e-6)


def test_table_bookkeeping():
    records = [SampleRecord(path=f"b{i}", label="benign") for i in range(13250)]
    records += [SampleRecord(path=f"m{i}", label="malignant") for i in range(5150)]
    manifest = DatasetManifest(records=records)
    plan_split = stratified_split(manifest, 0.85, seed=0)
    benign_train = sum(1 for i in plan_split.train
                       if manifest.records[i].label == "benign")
    malignant_train = len(plan_split.train) - benign_train
    benign_test = 13250 - benign_train
    malignant_test = 5150 - malignant_train
    assert abs(benign_train - 11262) <= 2
    assert abs(benign_test - 1988) <= 2
    assert abs(malignant_train - 4376) <= 2
    assert abs(malignant_test - 774) <= 2

    plan = plan_augmentation({"benign": 11262, "malignant": 4376})
    after_benign = plan.output_count("benign", 11262)
    after_malignant = plan.output_count("malignant", 4376)
    assert after_benign == 33786
    assert after_malignant == 17504
    assert after_benign + after_malignant == 51290
    assert after_benign + after_malignant + 1988 + 774 == 54052


def test_dark_skin_augmentation_bookkeeping():
    plan = plan_augmentation({"malignant": 46}, {"malignant": 750},
                             cycle=BIAS_CYCLE)
    assert plan.per_class_copies["malignant"] == 704
    share = 750 / 54052
    assert round(share * 100, 1) == 1.4


# -- numerical core -----------------------------------------------------------

def test_gradient_correctness():
    # >=100 randomly seeded toy nets, <=2 conv blocks, 16x16 inputs, both losses
    cfg = NetworkConfig(input_shape=(2, 16, 16), layers=[
        conv3x3(3), relu(), maxpool2x2(),
        conv3x3(3), relu(), maxpool2x2(),
        flatten(), dense(4), relu(), dense(1), sigmoid()])
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed + 10_000)
        params = build_network(cfg, seed)
        for e in params.entries:
            e.bias[:] = rng.normal(0, 0.1, e.bias.shape).astype(np.float32)
        x = rng.random((1, 2, 16, 16), dtype=np.float32)
        y = np.array([float(seed % 2)])
        loss_kind = "bce" if seed % 2 == 0 else "half_squared"
        err = gradient_check(params, cfg, x, y, loss_kind, epsilon=1e-3)
        worst = max(worst, err)
    assert worst <= 1e-3, f"max relative error {worst:.3e}"


def test_freeze_invariant():
    cfg = small_config((3, 16, 16))
    cfg.freeze_boundary = 1  # both convs frozen, dense head trainable
    params = build_network(cfg, 12)
    frozen_before = [(e.weight.copy(), e.bias.copy()) for e in params.entries[:2]]
    unfrozen_before = [e.weight.copy() for e in params.entries[2:]]

    x, y = blob_batch(40, seed=17, size=16)  # separable data
    train(params, cfg, x, y, TrainConfig(epochs=5, batch_size=16, shuffle_seed=0))

    for entry, (w, b) in zip(params.entries[:2], frozen_before):
        assert entry.weight.tobytes() == w.tobytes()
        assert entry.bias.tobytes() == b.tobytes()
    for entry, w in zip(params.entries[2:], unfrozen_before):
        assert entry.weight.tobytes() != w.tobytes()


def test_auc_oracle_equivalence():
    rng = np.random.default_rng(404)
    checked = 0
    for case in range(998):
        n = int(rng.integers(2, 201))
        quantize = int(rng.integers(1, 12))
        scores = np.round(rng.random(n) * quantize) / quantize
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        got = auc(roc_curve(scores, labels))
        want = mann_whitney_auc(scores, labels)
        assert abs(got - want) <= 1e-9
        checked += 1

    # stated endpoints: all-tied -> 0.5, perfect separation -> 1.0
    tied = np.full(100, 0.37)
    tied_labels = np.tile([0, 1], 50)
    assert auc(roc_curve(tied, tied_labels)) == pytest.approx(0.5, abs=1e-9)
    assert mann_whitney_auc(tied, tied_labels) == pytest.approx(0.5, abs=1e-9)
    perfect = np.concatenate([np.linspace(0.6, 1.0, 40), np.linspace(0.0, 0.4, 60)])
    perfect_labels = np.array([1] * 40 + [0] * 60)
    assert auc(roc_curve(perfect, perfect_labels)) == pytest.approx(1.0, abs=1e-9)
    assert checked + 2 >= 1000


def test_desk_scale_training_benchmark():
    # synthetic stand-in for the paper-scale run: blob size/irregularity
    # encodes the class; default train config, well under 100 epochs
    xtr, ytr = blob_batch(300, seed=1, size=32)   # 600 train
    xte, yte = blob_batch(100, seed=2, size=32)   # 200 test
    cfg = small_config((3, 32, 32))
    params = build_network(cfg, 7)
    train_cfg = TrainConfig(epochs=12, batch_size=32, shuffle_seed=0)  # defaults otherwise
    assert train_cfg.loss == "bce" and train_cfg.optimizer == "adam"
    assert train_cfg.lr == 1e-3
    train(params, cfg, xtr, ytr, train_cfg)
    report = evaluate(forward(params, cfg, xte), yte)
    assert report.accuracy >= 0.90, report.accuracy
    assert report.auc >= 0.95, report.auc


def test_transfer_learning_emulation():
    hard = dict(benign_radius=(0.13, 0.19), malignant_radius=(0.19, 0.28),
                noise=12.0)
    cfg = small_config((3, 32, 32))

    # pretrain on task A
    xa, ya = blob_batch(300, seed=10, style="lesion", **hard)
    pretrained = build_network(cfg, 3)
    train(pretrained, cfg, xa, ya,
          TrainConfig(epochs=12, batch_size=32, shuffle_seed=0))

    # shifted task B: different palette, little data
    xb, yb = blob_batch(24, seed=20, style="shifted", **hard)
    xbt, ybt = blob_batch(100, seed=21, style="shifted", **hard)
    compare_cfg = TrainConfig(epochs=80, batch_size=48, lr=5e-4, shuffle_seed=1)

    def epochs_to_target(params, net_cfg, target=0.85):
        hits = []

        def after(epoch, stats):
            acc = evaluate(forward(params, net_cfg, xbt), ybt).accuracy
            hits.append(acc)
            return acc >= target

        train(params, net_cfg, xb, yb, compare_cfg, after_epoch=after)
        for i, acc in enumerate(hits):
            if acc >= target:
                return i + 1
        return None

    scratch_epochs = []
    for seed in (5, 6, 7):
        cfg.freeze_boundary = -1
        n = epochs_to_target(build_network(cfg, seed), cfg)
        assert n is not None, "from-scratch run never reached 85%"
        scratch_epochs.append(n)
    scratch = sorted(scratch_epochs)[1]  # median of three seeds

    cfg.freeze_boundary = 1  # conv features frozen, dense head retrained
    fine_tune = epochs_to_target(pretrained.copy(), cfg)
    assert fine_tune is not None, "fine-tune never reached 85%"
    assert fine_tune <= 0.25 * scratch, (fine_tune, scratch_epochs)


# -- pipeline criteria ----------------------------------------------------------

def test_trigger_truth_table():
    cfg = TriggerConfig()
    for period in (False, True):
        for growth in (False, True):
            for degraded in (False, True):
                s, now = state(days_since_train=31 if period else 5,
                               current=1150 if growth else 1010)
                records = feedback(85, 15) if degraded else feedback(95, 5)
                decision = check_triggers(s, now, records, cfg)
                assert decision.schedule == (period and growth)
                assert decision.degradation == degraded

    # boundaries: exactly 30 days, exactly 10% growth, accuracy exactly 0.90
    s, now = state(days_since_train=30, size_at_train=1000, current=1100)
    assert check_triggers(s, now, [], cfg).schedule is True
    s, now = state(days_since_train=30, size_at_train=1000, current=1099)
    assert check_triggers(s, now, [], cfg).schedule is False
    s, now = state(days_since_train=1, current=1000)
    assert check_triggers(s, now, feedback(90, 10), cfg).degradation is False
    assert check_triggers(s, now, feedback(89, 11), cfg).degradation is True


def test_gate_and_registry_properties(tmp_path):
    # 10,000 random register/transition sequences keep <=1 production version
    cfg = small_config((3, 16, 16))
    weights = tmp_path / "w.melw"
    save_weights(build_network(cfg, 0), cfg, weights)
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        registry = Registry(root=None, verify_weights=False)
        for _ in range(int(rng.integers(1, 8))):
            op = rng.integers(0, 3)
            target = int(rng.integers(0, 6))
            try:
                if op == 0:
                    registry.register(weights, make_report(), "d")
                elif op == 1:
                    registry.transition(target, "production")
                else:
                    registry.transition(target, "archived")
            except (UnknownVersionError, IllegalTransitionError):
                pass
            live = [v for v in registry.list_versions()
                    if v.stage == "production"]
            assert len(live) <= 1


def test_gate_rejection_never_changes_classify_outputs(tmp_path):
    manifest = write_blob_dataset(tmp_path / "data", 24, 24, seed=3, size=16)
    config = PipelineConfig(
        data_dir=tmp_path / "svc",
        manifest=str(manifest),
        train=TrainSettings(arch="small", input_shape=(3, 16, 16),
                            train_fraction=0.8, epochs=5, batch_size=16,
                            lr=3e-3),
        augment=AugmentSettings(enabled=False),
    )
    registry = Registry(config.data_dir / "registry")
    first = run_pipeline(config, registry, PipelineState())
    assert first.accepted

    app = create_app(config)
    client = TestClient(app)
    payload = _png_payload(seed=11)
    before = client.post("/api/v1/classify", content=payload).json()

    config.train.epochs = 1
    config.train.lr = 1e-7
    config.train.init_seed = 77
    second = run_pipeline(config, registry, PipelineState(),
                          hot_swap=app.state.ctx.swap_in)
    assert second.accepted is False

    after = client.post("/api/v1/classify", content=payload).json()
    assert after["model_version"] == before["model_version"]
    assert after["probability"] == before["probability"]
    assert after["label"] == before["label"]


def test_skew_detection(tmp_path):
    base_dir = tmp_path / "skewdata"
    manifest_path = write_blob_dataset(base_dir, 16, 8, seed=5, size=16)

    def fresh_config(tag, reference=None):
        cfg = PipelineConfig(
            data_dir=tmp_path / f"state_{tag}",
            manifest=str(manifest_path),
            train=TrainSettings(arch="small", input_shape=(3, 16, 16),
                                train_fraction=0.8, epochs=1, batch_size=8),
            augment=AugmentSettings(enabled=False),
        )
        cfg.data_dir.mkdir(parents=True, exist_ok=True)
        if reference is not None:
            (cfg.data_dir / "reference_profile.json").write_text(
                json.dumps(reference))
        return cfg

    from lesionpipe.data import load_manifest, profile_dataset
    true_profile = profile_dataset(load_manifest(manifest_path)).to_dict()

    cases = []

    # 1. wrong channels: overwrite one image as RGBA
    Image.new("RGBA", (16, 16), (8, 8, 8, 99)).save(
        base_dir / "benign" / "b00000.png")
    cases.append(("channels", fresh_config("ch"), CHANNEL_MISMATCH,
                  "schema_validation"))

    def run_case(name, cfg, code, stage_name):
        report = run_pipeline(cfg, Registry(cfg.data_dir / "registry"),
                              PipelineState())
        assert report.aborted_at == stage_name, (name, report.to_dict())
        failed = next(s for s in report.stages if s.name == stage_name)
        assert code in failed.detail, (name, failed.detail)
        statuses = {s.name: s.status for s in report.stages}
        assert statuses["training"] == "skipped", name

    for case in cases:
        run_case(*case)
    Image.fromarray(make_blob_image(np.random.default_rng(0), "benign", 16)
                    .pixels).save(base_dir / "benign" / "b00000.png")

    # 2. bad label
    doc = json.loads(manifest_path.read_text())
    doc["records"][0]["label"] = "melanoma?"
    bad_label = tmp_path / "bad_label.json"
    bad_label.write_text(json.dumps(doc))
    cfg = fresh_config("label")
    cfg.manifest = str(bad_label)
    run_case("label", cfg, LABEL_DOMAIN, "schema_validation")

    # 3. out-of-range pixels: 16-bit PNG
    Image.fromarray(np.full((16, 16), 2000, dtype=np.uint16)).save(
        base_dir / "benign" / "b00001.png")
    run_case("pixel_range", fresh_config("px"), PIXEL_RANGE, "schema_validation")
    Image.fromarray(make_blob_image(np.random.default_rng(1), "benign", 16)
                    .pixels).save(base_dir / "benign" / "b00001.png")

    # 4-6. value drifts against a planted reference profile
    drifted = dict(true_profile)
    drifted["per_channel_mean"] = [m - 0.2 for m in true_profile["per_channel_mean"]]
    run_case("mean_drift", fresh_config("mean", drifted), MEAN_DRIFT,
             "value_validation")

    drifted = dict(true_profile)
    drifted["per_channel_std"] = [s + 0.2 for s in true_profile["per_channel_std"]]
    run_case("std_drift", fresh_config("std", drifted), STD_DRIFT,
             "value_validation")

    drifted = dict(true_profile)
    drifted["class_ratio"] = true_profile["class_ratio"] * 1.36
    run_case("ratio_drift", fresh_config("ratio", drifted), CLASS_RATIO_DRIFT,
             "value_validation")


# -- serving criteria --------------------------------------------------------------

def _png_payload(seed=0, size=16) -> bytes:
    img = make_blob_image(np.random.default_rng(seed), "malignant", size)
    buf = io.BytesIO()
    Image.fromarray(img.pixels).save(buf, format="PNG")
    return buf.getvalue()


def test_serving_round_trip_and_hot_swap(tmp_path):
    config = PipelineConfig(data_dir=tmp_path / "svc",
                            train=TrainSettings(input_shape=(3, 16, 16)))
    registry = Registry(config.data_dir / "registry")
    net = small_config((3, 16, 16))
    params = build_network(net, 1)
    weights = config.data_dir / "w1.melw"
    save_weights(params, net, weights)
    rng = np.random.default_rng(0)
    scores = np.concatenate([rng.uniform(0.6, 1, 20), rng.uniform(0, 0.4, 20)])
    labels = np.array([1] * 20 + [0] * 20)
    v1 = registry.register(weights, evaluate(scores, labels, test_digest="d"),
                           "d")
    registry.transition(v1.version_id, "production")

    app = create_app(config)
    ctx = app.state.ctx
    client = TestClient(app)
    payload = _png_payload(seed=4)

    body = client.post("/api/v1/classify", content=payload).json()
    assert 0.0 <= body["probability"] <= 1.0
    expected_label = "malignant" if body["probability"] >= 0.5 else "benign"
    assert body["label"] == expected_label

    # concurrent soak: 100 classifies racing one hot swap
    snap2 = ModelSnapshot(version_id=2, params=build_network(net, 9),
                          config=net)
    results, errors = [], []

    def worker():
        local = TestClient(app)
        for _ in range(10):
            try:
                out = local.post("/api/v1/classify", content=payload).json()
                results.append(out["model_version"])
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(10)]
    for t in threads:
        t.start()
    time.sleep(0.05)
    assert ctx.model_store.hot_swap(snap2)
    for t in threads:
        t.join()
    assert not errors
    assert len(results) == 100
    assert set(results) <= {1, 2}
    assert 2 in set(results)
