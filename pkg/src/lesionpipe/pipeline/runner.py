"""Orchestrated retraining run: validate data, augment, train, evaluate
candidate and incumbent on the same frozen test set, gate, and promote.

A stage failure aborts everything downstream; the per-run report records
each stage's outcome. The dataset-size watermark moves only when a run
reaches its gate decision.
"""
from __future__ import annotations

import json
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..augment import TRAIN_CYCLE, apply_plan, plan_augmentation
from ..data import (
    DatasetManifest,
    DatasetProfile,
    load_image,
    load_manifest,
    normalize,
    profile_dataset,
    resize_bilinear,
    stratified_split,
)
from ..metrics import EvalReport, evaluate
from ..nn import (
    NetworkConfig,
    architecture,
    build_network,
    forward,
    load_weights,
    save_weights,
    train,
)
from .gate import gate_candidate
from .registry import Registry
from .triggers import PipelineState, utcnow
from .validation import validate_schema, validate_values

if TYPE_CHECKING:
    from ..config import PipelineConfig

SUBGROUP_KEYS = ("sex", "age_band", "anatomical_site", "skin_tone")


@dataclass
class StageResult:
    name: str
    status: str  # "ok" | "failed" | "skipped"
    detail: str = ""
    elapsed_ms: float = 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status,
                "detail": self.detail, "elapsed_ms": round(self.elapsed_ms, 3)}


@dataclass
class PipelineRunReport:
    run_id: str
    trigger_reason: str
    started_at: str
    finished_at: str | None = None
    stages: list[StageResult] = field(default_factory=list)
    aborted_at: str | None = None
    accepted: bool | None = None
    gate_reasons: list[str] = field(default_factory=list)
    version_id: int | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "trigger_reason": self.trigger_reason,
                "started_at": self.started_at, "finished_at": self.finished_at,
                "stages": [s.to_dict() for s in self.stages],
                "aborted_at": self.aborted_at, "accepted": self.accepted,
                "gate_reasons": self.gate_reasons, "version_id": self.version_id,
                "error": self.error}

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")


class _Abort(Exception):
    def __init__(self, stage: str, detail: str):
        super().__init__(detail)
        self.stage = stage
        self.detail = detail


def _load_batch(manifest: DatasetManifest, indices, input_shape,
                mode: str) -> tuple[np.ndarray, np.ndarray, list[dict]]:
    _, h, w = input_shape
    xs, ys, metas = [], [], []
    for i in indices:
        rec = manifest.records[i]
        img = resize_bilinear(load_image(rec.path), w, h)
        xs.append(normalize(img, mode).array)
        ys.append(1.0 if rec.label == "malignant" else 0.0)
        metas.append(rec.metadata)
    return (np.stack(xs).astype(np.float32), np.asarray(ys, dtype=np.float32),
            metas)


def _evaluate_params(params, net_config, manifest, indices, mode, digest,
                     batch: int = 64) -> EvalReport:
    scores = []
    labels = []
    metas = []
    for lo in range(0, len(indices), batch):
        xs, ys, ms = _load_batch(manifest, indices[lo:lo + batch],
                                 net_config.input_shape, mode)
        scores.append(forward(params, net_config, xs))
        labels.append(ys)
        metas.extend(ms)
    scores = np.concatenate(scores)
    labels = np.concatenate(labels)
    keys = tuple(k for k in SUBGROUP_KEYS if any(k in m for m in metas))
    return evaluate(scores, labels, metas, group_keys=keys, test_digest=digest)


def run_pipeline(cfg: "PipelineConfig", registry: Registry,
                 state: PipelineState, trigger_reason: str = "manual",
                 manifest_path: str | Path | None = None,
                 hot_swap=None, run_id: str | None = None) -> PipelineRunReport:
    """Execute one full continuous-training run.

    ``hot_swap(version, params, net_config)`` is invoked after a promotion
    so a live service can atomically pick up the new model; batch/CLI runs
    pass None.
    """
    run_id = run_id or f"{utcnow().strftime('%Y%m%dT%H%M%S')}_{secrets.token_hex(4)}"
    report = PipelineRunReport(run_id=run_id, trigger_reason=trigger_reason,
                               started_at=utcnow().isoformat())
    data_dir = Path(cfg.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    run_dir = data_dir / "runs" / run_id
    manifest_path = Path(manifest_path or cfg.manifest)

    def stage(name: str):
        def wrap(fn):
            if report.aborted_at is not None:
                report.stages.append(StageResult(name, "skipped"))
                return None
            start = time.perf_counter()
            try:
                out = fn()
            except _Abort as abort:
                report.stages.append(StageResult(
                    name, "failed", abort.detail,
                    (time.perf_counter() - start) * 1000))
                report.aborted_at = abort.stage
                return None
            except Exception as exc:  # unexpected; still abort downstream
                report.stages.append(StageResult(
                    name, "failed", f"{type(exc).__name__}: {exc}",
                    (time.perf_counter() - start) * 1000))
                report.aborted_at = name
                report.error = str(exc)
                return None
            report.stages.append(StageResult(
                name, "ok", elapsed_ms=(time.perf_counter() - start) * 1000))
            return out
        return wrap

    # -- schema skew -------------------------------------------------------
    @stage("schema_validation")
    def schema_ok():
        skew = validate_schema(manifest_path)
        if not skew.passed:
            raise _Abort("schema_validation",
                         "; ".join(f"{f.code}: {f.detail}" for f in skew.findings))
        return True

    manifest = load_manifest(manifest_path) if report.aborted_at is None else None

    # -- value skew ---------------------------------------------------------
    @stage("value_validation")
    def profile():
        candidate_profile = profile_dataset(manifest)
        ref_path = data_dir / "reference_profile.json"
        if ref_path.is_file():
            reference = DatasetProfile.load(ref_path)
            skew = validate_values(candidate_profile, reference, cfg.skew)
            if not skew.passed:
                raise _Abort("value_validation",
                             "; ".join(f"{f.code}: {f.detail}" for f in skew.findings))
        return candidate_profile

    # -- split + augmentation ------------------------------------------------
    @stage("augmentation")
    def splits():
        plan_split = stratified_split(manifest, cfg.train.train_fraction,
                                      cfg.train.split_seed)
        if cfg.augment.enabled:
            counts: dict[str, int] = {}
            for i in plan_split.train:
                label = manifest.records[i].label
                counts[label] = counts.get(label, 0) + 1
            plan = plan_augmentation(counts, cfg.augment.targets, TRAIN_CYCLE)
            train_manifest = apply_plan(manifest, plan_split, plan,
                                        cfg.augment.seed, run_dir)
        else:
            train_manifest = DatasetManifest(
                records=[manifest.records[i] for i in plan_split.train],
                expected_width=manifest.expected_width,
                expected_height=manifest.expected_height,
                expected_channels=manifest.expected_channels)
        test_manifest = DatasetManifest(
            records=[manifest.records[i] for i in plan_split.test],
            expected_width=manifest.expected_width,
            expected_height=manifest.expected_height,
            expected_channels=manifest.expected_channels)
        test_manifest.save(run_dir / "test_manifest.json")
        return train_manifest, test_manifest

    # -- training -------------------------------------------------------------
    @stage("training")
    def trained():
        train_manifest, _ = splits
        net_config = architecture(cfg.train.arch, cfg.train.input_shape)
        net_config.freeze_boundary = cfg.train.freeze_boundary
        if cfg.train.base_weights:
            params, loaded_cfg = load_weights(cfg.train.base_weights)
            net_config.layers = loaded_cfg.layers
            net_config.input_shape = loaded_cfg.input_shape
        elif cfg.train.warm_start and registry.production() is not None:
            params, loaded_cfg = load_weights(registry.production().weights_path)
            net_config.layers = loaded_cfg.layers
            net_config.input_shape = loaded_cfg.input_shape
        else:
            params = build_network(net_config, cfg.train.init_seed)
        xs, ys, _ = _load_batch(train_manifest, range(len(train_manifest)),
                                net_config.input_shape, cfg.train.normalize_mode)
        train(params, net_config, xs, ys, cfg.train.train_config())
        return params, net_config

    # -- evaluation --------------------------------------------------------------
    @stage("evaluation")
    def reports():
        params, net_config = trained
        _, test_manifest = splits
        digest = test_manifest.digest()
        candidate = _evaluate_params(params, net_config, test_manifest,
                                     range(len(test_manifest)),
                                     cfg.train.normalize_mode, digest)
        incumbent_report = None
        incumbent = registry.production()
        if incumbent is not None:
            inc_params, inc_cfg = load_weights(incumbent.weights_path)
            incumbent_report = _evaluate_params(
                inc_params, inc_cfg, test_manifest, range(len(test_manifest)),
                cfg.train.normalize_mode, digest)
        return candidate, incumbent_report

    # -- gate + registry -----------------------------------------------------------
    @stage("gate")
    def gated():
        candidate, incumbent_report = reports
        decision = gate_candidate(candidate, incumbent_report, cfg.gate)
        report.accepted = decision.accepted
        report.gate_reasons = decision.reasons
        return decision

    @stage("registration")
    def registered():
        params, net_config = trained
        candidate, _ = reports
        weights_path = run_dir / "candidate.melw"
        save_weights(params, net_config, weights_path)
        version = registry.register(weights_path, candidate,
                                    candidate.test_digest)
        report.version_id = version.version_id
        if gated.accepted:
            registry.transition(version.version_id, "production")
            if hot_swap is not None:
                hot_swap(version.version_id, params, net_config)
        return version

    # -- bookkeeping ------------------------------------------------------------------
    if report.aborted_at is None:
        state.last_train_time = utcnow()
        state.dataset_size_at_last_train = len(manifest)
        state.current_dataset_size = len(manifest)
        state.save(data_dir / "state.json")
        profile.save(data_dir / "reference_profile.json")

    report.finished_at = utcnow().isoformat()
    report.save(data_dir / "runs" / f"{run_id}.json")
    return report
