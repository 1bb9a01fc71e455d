"""Retraining triggers: the monthly-schedule-plus-growth rule and the
clinician-feedback degradation rule."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

VERDICTS = ("correct", "incorrect")


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime | None) -> str | None:
    return ts.isoformat() if ts else None


def _parse_iso(s: str | None) -> datetime | None:
    return datetime.fromisoformat(s) if s else None


@dataclass
class TriggerConfig:
    schedule_period: timedelta = timedelta(days=30)
    growth_threshold: float = 0.10       # fires at >= 10% more images
    degradation_threshold: float = 0.90  # fires strictly below
    feedback_window: int = 100

    def __post_init__(self):
        if not 0 < self.growth_threshold <= 1 or not 0 < self.degradation_threshold <= 1:
            raise ValueError("thresholds must be in (0, 1]")
        if self.feedback_window < 10:
            raise ValueError("feedback window must be >= 10")

    @classmethod
    def from_dict(cls, d: dict) -> "TriggerConfig":
        kwargs = {}
        if "schedule_period_days" in d:
            kwargs["schedule_period"] = timedelta(days=float(d["schedule_period_days"]))
        for key in ("growth_threshold", "degradation_threshold", "feedback_window"):
            if key in d:
                kwargs[key] = d[key]
        return cls(**kwargs)


@dataclass
class FeedbackRecord:
    request_id: str
    model_version: int
    verdict: str  # "correct" | "incorrect"
    true_label: str | None = None
    submitted_at: datetime = field(default_factory=utcnow)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")
        if self.verdict == "incorrect" and not self.true_label:
            raise ValueError("incorrect verdicts must carry true_label")

    def to_dict(self) -> dict:
        return {"request_id": self.request_id, "model_version": self.model_version,
                "verdict": self.verdict, "true_label": self.true_label,
                "submitted_at": _iso(self.submitted_at)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRecord":
        return cls(request_id=d["request_id"], model_version=int(d["model_version"]),
                   verdict=d["verdict"], true_label=d.get("true_label"),
                   submitted_at=_parse_iso(d["submitted_at"]))


@dataclass
class PipelineState:
    """Trigger clocks and the dataset-size watermark."""

    last_train_time: datetime | None = None
    dataset_size_at_last_train: int = 0
    current_dataset_size: int = 0
    pending_triggers: set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {"last_train_time": _iso(self.last_train_time),
                "dataset_size_at_last_train": self.dataset_size_at_last_train,
                "current_dataset_size": self.current_dataset_size,
                "pending_triggers": sorted(self.pending_triggers)}

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineState":
        return cls(last_train_time=_parse_iso(d.get("last_train_time")),
                   dataset_size_at_last_train=int(d.get("dataset_size_at_last_train", 0)),
                   current_dataset_size=int(d.get("current_dataset_size", 0)),
                   pending_triggers=set(d.get("pending_triggers", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PipelineState":
        path = Path(path)
        if not path.is_file():
            return cls()
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))


@dataclass
class TriggerDecision:
    schedule: bool
    degradation: bool
    rolling_accuracy: float | None
    growth: float | None  # relative dataset growth since last train
    fired: list[str]

    def to_dict(self) -> dict:
        return {"schedule": self.schedule, "degradation": self.degradation,
                "rolling_accuracy": self.rolling_accuracy,
                "growth": self.growth, "fired": self.fired}


def rolling_accuracy(feedback: list[FeedbackRecord], window: int) -> float | None:
    """Fraction of correct verdicts over the most recent `window` records;
    None until the window fills."""
    if len(feedback) < window:
        return None
    recent = sorted(feedback, key=lambda r: r.submitted_at)[-window:]
    return sum(1 for r in recent if r.verdict == "correct") / window


def check_triggers(state: PipelineState, now: datetime,
                   feedback: list[FeedbackRecord],
                   cfg: TriggerConfig | None = None) -> TriggerDecision:
    """Schedule fires iff the period elapsed AND the dataset grew by at
    least the growth threshold (boundary inclusive on both). Degradation
    fires iff the feedback window is full AND rolling accuracy is strictly
    below the degradation threshold. A never-trained pipeline counts as
    period-elapsed."""
    cfg = cfg or TriggerConfig()

    elapsed = (state.last_train_time is None
               or now - state.last_train_time >= cfg.schedule_period)
    if state.dataset_size_at_last_train > 0:
        growth = (state.current_dataset_size - state.dataset_size_at_last_train) \
            / state.dataset_size_at_last_train
    else:
        growth = None  # no watermark yet; any data counts as growth
    grew = growth is None and state.current_dataset_size > 0 or \
        (growth is not None and growth >= cfg.growth_threshold)
    schedule = elapsed and grew

    acc = rolling_accuracy(feedback, cfg.feedback_window)
    degradation = acc is not None and acc < cfg.degradation_threshold

    fired = [name for name, hit in (("schedule", schedule),
                                    ("degradation", degradation)) if hit]
    return TriggerDecision(schedule=schedule, degradation=degradation,
                           rolling_accuracy=acc, growth=growth, fired=fired)
