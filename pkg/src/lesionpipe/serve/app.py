"""HTTP classification service: classify uploads against the production
model, collect clinician feedback, expose pipeline status, and hot-swap
models when the pipeline promotes a new version."""
from __future__ import annotations

import io
import json
import secrets
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image, UnidentifiedImageError
from starlette.concurrency import run_in_threadpool
from starlette.staticfiles import StaticFiles

from ..config import PipelineConfig
from ..data import PixelImage, normalize, resize_bilinear, save_image
from ..nn import forward
from ..pipeline import PipelineState, Registry, check_triggers, run_pipeline
from ..pipeline.triggers import FeedbackRecord, rolling_accuracy, utcnow
from .model_store import ModelSnapshot, ModelStore
from .stores import FeedbackStore, RequestEntry, RequestLog


class RunManager:
    """At most one pipeline run at a time."""

    def __init__(self):
        self._lock = threading.Lock()
        self.active_run_id: str | None = None

    def try_start(self, target, run_id: str) -> bool:
        if not self._lock.acquire(blocking=False):
            return False
        self.active_run_id = run_id

        def wrapped():
            try:
                target()
            finally:
                self.active_run_id = None
                self._lock.release()

        threading.Thread(target=wrapped, daemon=True).start()
        return True

    @property
    def running(self) -> bool:
        return self.active_run_id is not None


class ServiceContext:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.registry = Registry(self.data_dir / "registry")
        self.model_store = ModelStore()
        self.request_log = RequestLog(limit=config.serve.request_log_limit)
        self.feedback = FeedbackStore(self.data_dir / "feedback.jsonl")
        self.runs = RunManager()
        production = self.registry.production()
        if production is not None:
            self.model_store.hot_swap(ModelSnapshot.from_weights_file(
                production.version_id, production.weights_path,
                config.train.normalize_mode))

    # -- helpers -----------------------------------------------------------

    def pipeline_state(self) -> PipelineState:
        return PipelineState.load(self.data_dir / "state.json")

    def feedback_for_triggers(self) -> list[FeedbackRecord]:
        if self.config.serve.feedback_scope == "production_only":
            snap = self.model_store.snapshot()
            if snap is None:
                return []
            return self.feedback.records(model_version=snap.version_id)
        return self.feedback.records()

    def last_run_summary(self) -> dict | None:
        runs_dir = self.data_dir / "runs"
        reports = sorted(runs_dir.glob("*.json")) if runs_dir.is_dir() else []
        if not reports:
            return None
        doc = json.loads(reports[-1].read_text(encoding="utf-8"))
        return {"run_id": doc["run_id"], "accepted": doc["accepted"],
                "aborted_at": doc["aborted_at"],
                "finished_at": doc["finished_at"]}

    def swap_in(self, version_id: int, params, net_config) -> bool:
        return self.model_store.hot_swap(ModelSnapshot(
            version_id=version_id, params=params, config=net_config,
            normalize_mode=self.config.train.normalize_mode))

    def start_pipeline_run(self, reason: str) -> str | None:
        run_id = f"{utcnow().strftime('%Y%m%dT%H%M%S')}_{secrets.token_hex(4)}"

        def job():
            run_pipeline(self.config, self.registry, self.pipeline_state(),
                         trigger_reason=reason, hot_swap=self.swap_in,
                         run_id=run_id)

        return run_id if self.runs.try_start(job, run_id) else None


def _classify_image(ctx: ServiceContext, snapshot: ModelSnapshot,
                    image: PixelImage, request_id: str) -> dict:
    start = time.perf_counter()
    _, h, w = snapshot.config.input_shape
    resized = resize_bilinear(image, w, h)
    tensor = normalize(resized, snapshot.normalize_mode).array[None]
    prob = float(forward(snapshot.params, snapshot.config,
                         tensor.astype(np.float32))[0])
    label = "malignant" if prob >= 0.5 else "benign"

    image_path = None
    if ctx.config.serve.store_uploads:
        image_path = str(ctx.data_dir / "uploads" / f"{request_id}.png")
        save_image(image, image_path)
    ctx.request_log.add(RequestEntry(
        request_id=request_id, label=label, probability=prob,
        model_version=snapshot.version_id, created_at=utcnow(),
        image_path=image_path))
    return {"request_id": request_id, "label": label, "probability": prob,
            "model_version": snapshot.version_id,
            "elapsed_ms": round((time.perf_counter() - start) * 1000, 3)}


def create_app(config: PipelineConfig | None = None) -> FastAPI:
    config = config or PipelineConfig()
    ctx = ServiceContext(config)
    app = FastAPI(title="lesionpipe", version="0.1.0")
    app.state.ctx = ctx

    @app.middleware("http")
    async def shared_token_hook(request: Request, call_next):
        # deployment-environment auth stays out of scope; this hook only
        # honors a shared token when one is configured
        token = config.serve.auth_token
        if token and request.headers.get("x-auth-token") != token:
            return JSONResponse({"detail": "unauthorized"}, status_code=401)
        return await call_next(request)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/v1/classify")
    async def classify(request: Request):
        body = await request.body()
        if len(body) > config.serve.max_body_bytes:
            return JSONResponse({"detail": "body too large"}, status_code=413)
        snapshot = ctx.model_store.snapshot()
        if snapshot is None:
            return JSONResponse({"detail": "no production model"}, status_code=503)
        try:
            with Image.open(io.BytesIO(body)) as im:
                pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
            image = PixelImage(pixels)
        except (UnidentifiedImageError, OSError, ValueError):
            return JSONResponse({"detail": "not a decodable PNG/JPEG image"},
                                status_code=400)
        request_id = secrets.token_hex(16)
        return await run_in_threadpool(_classify_image, ctx, snapshot, image,
                                       request_id)

    @app.post("/api/v1/feedback")
    def feedback(payload: dict):
        request_id = payload.get("request_id")
        verdict = payload.get("verdict")
        true_label = payload.get("true_label")
        entry = ctx.request_log.get(request_id) if request_id else None
        if entry is None:
            return JSONResponse({"detail": "unknown request_id"}, status_code=404)
        if verdict not in ("correct", "incorrect"):
            return JSONResponse({"detail": "verdict must be correct|incorrect"},
                                status_code=422)
        if verdict == "incorrect" and true_label not in ("benign", "malignant"):
            return JSONResponse(
                {"detail": "incorrect verdicts must carry true_label"},
                status_code=422)
        if entry.has_feedback:
            return JSONResponse({"detail": "feedback already recorded"},
                                status_code=409)
        ctx.feedback.append(FeedbackRecord(
            request_id=request_id, model_version=entry.model_version,
            verdict=verdict, true_label=true_label))
        ctx.request_log.mark_feedback(request_id)
        _spill_labeled_upload(ctx, entry, verdict, true_label)
        return Response(status_code=204)

    @app.get("/api/v1/model")
    def model_info():
        snap = ctx.model_store.snapshot()
        if snap is None:
            return JSONResponse({"detail": "no production model"}, status_code=503)
        version = ctx.registry.get(snap.version_id)
        ev = version.eval
        return {"version_id": version.version_id, "stage": version.stage,
                "created_at": version.created_at.isoformat(),
                "eval": {"accuracy": ev.accuracy, "auc": ev.auc, "f1": ev.f1,
                         "precision": ev.precision, "recall": ev.recall}}

    @app.get("/api/v1/pipeline/status")
    def pipeline_status():
        state = ctx.pipeline_state()
        records = ctx.feedback_for_triggers()
        decision = check_triggers(state, utcnow(), records, config.trigger)
        window = config.trigger.feedback_window
        return {"rolling_accuracy": rolling_accuracy(records, window),
                "window_fill": min(len(records), window),
                "window": window,
                "triggers": {"schedule": decision.schedule,
                             "degradation": decision.degradation},
                "run_in_progress": ctx.runs.active_run_id,
                "last_run": ctx.last_run_summary()}

    @app.post("/api/v1/pipeline/trigger")
    def trigger(payload: dict | None = None):
        reason = (payload or {}).get("reason", "manual")
        run_id = ctx.start_pipeline_run(reason)
        if run_id is None:
            return JSONResponse({"detail": "a pipeline run is already active"},
                                status_code=409)
        return JSONResponse({"run_id": run_id}, status_code=202)

    @app.get("/api/v1/classifications")
    def classifications(limit: int = 20, unreviewed: bool = False):
        entries = ctx.request_log.recent(limit, unreviewed_only=unreviewed)
        return {"items": [e.to_dict() for e in entries]}

    @app.get("/api/v1/classifications/{request_id}/image")
    def classification_image(request_id: str):
        entry = ctx.request_log.get(request_id)
        if entry is None or entry.image_path is None:
            return JSONResponse({"detail": "no stored image"}, status_code=404)
        return FileResponse(entry.image_path, media_type="image/png")

    console_dir = config.serve.console_dir
    if console_dir and Path(console_dir).is_dir():
        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app


def _spill_labeled_upload(ctx: ServiceContext, entry: RequestEntry,
                          verdict: str, true_label: str | None) -> None:
    """When upload spill is on, verified feedback turns the stored image
    into a clinician-sourced training record and grows the dataset-size
    counter the schedule trigger watches."""
    if entry.image_path is None:
        return
    label = entry.label if verdict == "correct" else true_label
    manifest_path = ctx.data_dir / "clinician_manifest.json"
    if manifest_path.is_file():
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    else:
        doc = {"expected": {"width": ctx.config.train.input_shape[2],
                            "height": ctx.config.train.input_shape[1],
                            "channels": 3}, "records": []}
    doc["records"].append({"path": entry.image_path, "label": label,
                           "metadata": {"source": "clinician"}})
    manifest_path.write_text(json.dumps(doc, indent=1), encoding="utf-8")

    state_path = ctx.data_dir / "state.json"
    state = PipelineState.load(state_path)
    state.current_dataset_size += 1
    state.save(state_path)
