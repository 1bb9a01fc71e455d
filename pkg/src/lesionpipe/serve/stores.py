"""Serving-side state: the classify request log (feedback correlation,
bounded FIFO retention) and the append-only clinician feedback store."""
from __future__ import annotations

import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from ..pipeline.triggers import FeedbackRecord, utcnow


@dataclass
class RequestEntry:
    request_id: str
    label: str
    probability: float
    model_version: int
    created_at: datetime
    has_feedback: bool = False
    image_path: str | None = None  # set only when upload spill is enabled

    def to_dict(self) -> dict:
        return {"request_id": self.request_id, "label": self.label,
                "probability": self.probability,
                "model_version": self.model_version,
                "created_at": self.created_at.isoformat(),
                "has_feedback": self.has_feedback,
                "has_image": self.image_path is not None}


class RequestLog:
    """Bounded FIFO of classify requests keyed by request id."""

    def __init__(self, limit: int = 10_000):
        self._entries: OrderedDict[str, RequestEntry] = OrderedDict()
        self._limit = limit
        self._lock = threading.Lock()

    def add(self, entry: RequestEntry) -> None:
        with self._lock:
            self._entries[entry.request_id] = entry
            while len(self._entries) > self._limit:
                self._entries.popitem(last=False)

    def get(self, request_id: str) -> RequestEntry | None:
        with self._lock:
            return self._entries.get(request_id)

    def mark_feedback(self, request_id: str) -> None:
        with self._lock:
            self._entries[request_id].has_feedback = True

    def recent(self, limit: int, unreviewed_only: bool = False) -> list[RequestEntry]:
        with self._lock:
            entries = reversed(self._entries.values())
            out = []
            for entry in entries:
                if unreviewed_only and entry.has_feedback:
                    continue
                out.append(entry)
                if len(out) >= limit:
                    break
            return out

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class FeedbackStore:
    """Append-only feedback records, optionally journaled to JSON lines."""

    def __init__(self, path: Path | str | None = None):
        self._lock = threading.Lock()
        self._records: list[FeedbackRecord] = []
        self.path = Path(path) if path else None
        if self.path and self.path.is_file():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._records.append(FeedbackRecord.from_dict(json.loads(line)))

    def append(self, record: FeedbackRecord) -> None:
        with self._lock:
            self._records.append(record)
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_dict()) + "\n")
                    fh.flush()

    def records(self, model_version: int | None = None) -> list[FeedbackRecord]:
        with self._lock:
            if model_version is None:
                return list(self._records)
            return [r for r in self._records if r.model_version == model_version]

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)
