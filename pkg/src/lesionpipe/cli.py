"""Command-line entry points for the whole pipeline: ingest, eda, augment,
train, eval, registry, pipeline, serve, and a synthetic-data generator for
demos."""
from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .config import load_config
from .data import (
    load_image,
    load_manifest,
    profile_dataset,
    resize_bilinear,
    stratified_split,
)
from .metrics import evaluate
from .pipeline import PipelineState, Registry, check_triggers, run_pipeline
from .pipeline.triggers import utcnow
from .pipeline.validation import validate_schema


@click.group()
def main():
    """Continuous-training pipeline for skin-lesion classification."""


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
def ingest(manifest, config_path):
    """Validate a manifest, profile it, and store the reference profile."""
    cfg = load_config(config_path)
    report = validate_schema(manifest)
    if not report.passed:
        for finding in report.findings:
            click.echo(f"FINDING {finding.code}: {finding.detail}")
        raise SystemExit(1)
    loaded = load_manifest(manifest)
    profile = profile_dataset(loaded)
    cfg.data_dir.mkdir(parents=True, exist_ok=True)
    profile.save(cfg.data_dir / "reference_profile.json")
    state = PipelineState.load(cfg.data_dir / "state.json")
    state.current_dataset_size = len(loaded)
    state.save(cfg.data_dir / "state.json")
    counts = loaded.class_counts()
    click.echo(f"ingested {len(loaded)} records "
               f"(benign {counts['benign']}, malignant {counts['malignant']})")
    click.echo(f"profile: mean={[round(m, 4) for m in profile.per_channel_mean]} "
               f"class_ratio={profile.class_ratio:.3f}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--class", "class_name", default="both",
              type=click.Choice(["benign", "malignant", "both"]))
@click.option("--out", required=True, type=click.Path())
def eda(manifest, class_name, out):
    """Per-class mean/variance/std images and the difference heatmap."""
    from .eda import class_dispersion_image, class_mean_image, export_heatmap, \
        export_stat_image

    loaded = load_manifest(manifest)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    classes = ["benign", "malignant"] if class_name == "both" else [class_name]
    means = {}
    for label in classes:
        images = [resize_bilinear(load_image(loaded.records[i].path),
                                  loaded.expected_width, loaded.expected_height)
                  for i in loaded.by_class(label)]
        mean = class_mean_image(images)
        means[label] = mean
        export_stat_image(mean, out_dir / f"{label}_mean.png")
        if len(images) >= 2:
            variance, std = class_dispersion_image(images)
            export_stat_image(variance, out_dir / f"{label}_variance.png")
            export_stat_image(std, out_dir / f"{label}_std.png")
        click.echo(f"{label}: {len(images)} images")
    if len(means) == 2:
        export_heatmap(means["benign"], means["malignant"],
                       out_dir / "difference_heatmap.png")
        click.echo(f"wrote difference heatmap to {out_dir}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--train-fraction", default=0.85, type=float)
@click.option("--target", "targets", multiple=True,
              help="class=count target, e.g. malignant=750")
def augment(manifest, out, seed, train_fraction, targets):
    """Split a manifest and expand its training side per the plan."""
    from .augment import apply_plan, plan_augmentation

    loaded = load_manifest(manifest)
    split = stratified_split(loaded, train_fraction, seed)
    counts: dict[str, int] = {}
    for i in split.train:
        label = loaded.records[i].label
        counts[label] = counts.get(label, 0) + 1
    target_counts = None
    if targets:
        target_counts = {}
        for spec_str in targets:
            label, _, value = spec_str.partition("=")
            target_counts[label] = int(value)
    plan = plan_augmentation(counts, target_counts)
    derived = apply_plan(loaded, split, plan, seed, out)
    click.echo(f"train counts before: {counts}")
    click.echo(f"train counts after:  {derived.class_counts()}")
    click.echo(f"derived manifest: {Path(out) / 'train_manifest.json'}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(),
              help="weight file to write")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", default=None, type=int)
def train(manifest, out, config_path, seed):
    """Train a fresh model on a manifest (no pipeline orchestration)."""
    from .nn import architecture, build_network, save_weights
    from .nn import train as train_loop
    from .pipeline.runner import _load_batch

    cfg = load_config(config_path)
    if seed is not None:
        cfg.train.init_seed = seed
    loaded = load_manifest(manifest)
    net = architecture(cfg.train.arch, cfg.train.input_shape)
    net.freeze_boundary = cfg.train.freeze_boundary
    params = build_network(net, cfg.train.init_seed)
    xs, ys, _ = _load_batch(loaded, range(len(loaded)), net.input_shape,
                            cfg.train.normalize_mode)
    history = train_loop(params, net, xs, ys, cfg.train.train_config())
    save_weights(params, net, out)
    last = history.epochs[-1]
    click.echo(f"trained {cfg.train.epochs} epochs; final loss {last.loss:.4f} "
               f"accuracy {last.accuracy:.3f}")
    click.echo(f"weights: {out}")


@main.command(name="eval")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--weights", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def eval_cmd(manifest, weights, out):
    """Evaluate a weight file against a manifest."""
    from .nn import load_weights
    from .pipeline.runner import _evaluate_params

    loaded = load_manifest(manifest)
    params, net = load_weights(weights)
    report = _evaluate_params(params, net, loaded, range(len(loaded)), "unit",
                              loaded.digest())
    click.echo(json.dumps({k: report.to_dict()[k] for k in
                           ("tp", "fp", "tn", "fn", "precision", "recall",
                            "f1", "accuracy", "auc")}, indent=1))
    if out:
        report.save(out)
        click.echo(f"report: {out}")


@main.group()
def registry():
    """Inspect and mutate the model registry."""


@registry.command(name="list")
@click.option("--config", "config_path", type=click.Path(exists=True))
def registry_list(config_path):
    cfg = load_config(config_path)
    reg = Registry(cfg.data_dir / "registry")
    versions = reg.list_versions()
    if not versions:
        click.echo("registry empty")
        return
    for v in versions:
        click.echo(f"v{v.version_id}  {v.stage:10s}  acc={v.eval.accuracy:.4f} "
                   f"auc={v.eval.auc:.4f}  {v.created_at.isoformat()}")


@registry.command()
@click.argument("version_id", type=int)
@click.option("--config", "config_path", type=click.Path(exists=True))
def promote(version_id, config_path):
    cfg = load_config(config_path)
    reg = Registry(cfg.data_dir / "registry")
    version = reg.transition(version_id, "production")
    click.echo(f"v{version.version_id} -> production")


@main.group()
def pipeline():
    """Run and inspect the continuous-training pipeline."""


@pipeline.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--manifest", type=click.Path(exists=True))
@click.option("--reason", default="manual")
def run(config_path, manifest, reason):
    cfg = load_config(config_path)
    reg = Registry(cfg.data_dir / "registry")
    state = PipelineState.load(cfg.data_dir / "state.json")
    report = run_pipeline(cfg, reg, state, trigger_reason=reason,
                          manifest_path=manifest)
    for stage in report.stages:
        click.echo(f"{stage.name:20s} {stage.status:8s} "
                   f"{stage.elapsed_ms:9.1f} ms  {stage.detail}")
    if report.aborted_at:
        click.echo(f"ABORTED at {report.aborted_at}")
        raise SystemExit(1)
    verdict = "accepted" if report.accepted else \
        f"rejected ({', '.join(report.gate_reasons)})"
    click.echo(f"candidate v{report.version_id}: {verdict}")


@pipeline.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
def status(config_path):
    cfg = load_config(config_path)
    state = PipelineState.load(cfg.data_dir / "state.json")
    feedback_path = cfg.data_dir / "feedback.jsonl"
    from .serve.stores import FeedbackStore

    records = FeedbackStore(feedback_path).records()
    decision = check_triggers(state, utcnow(), records, cfg.trigger)
    click.echo(json.dumps({
        "dataset_size": state.current_dataset_size,
        "size_at_last_train": state.dataset_size_at_last_train,
        "last_train_time": state.last_train_time.isoformat()
        if state.last_train_time else None,
        "rolling_accuracy": decision.rolling_accuracy,
        "triggers": {"schedule": decision.schedule,
                     "degradation": decision.degradation},
    }, indent=1))


@main.command()
@click.option("--port", default=None, type=int)
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve(port, config_path):
    """Run the HTTP classification service."""
    import uvicorn

    from .serve import create_app

    cfg = load_config(config_path)
    app = create_app(cfg)
    uvicorn.run(app, host="127.0.0.1", port=port or cfg.serve.port,
                log_level="info")


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--benign", default=120, type=int)
@click.option("--malignant", default=60, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--size", default=32, type=int)
def synth(out, benign, malignant, seed, size):
    """Generate a synthetic lesion-blob dataset for demos and benchmarks."""
    from .synthetic import write_blob_dataset

    manifest = write_blob_dataset(out, benign, malignant, seed, size)
    click.echo(f"manifest: {manifest}")


if __name__ == "__main__":
    main()
