"""Model registry: versioned weight files with lifecycle stages and an
append-only JSON-lines journal so state is rebuildable after a crash.

Legal transitions: staging -> production, staging -> archived,
production -> archived. Promoting to production archives the previous
production version first, so at most one version is ever in production.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

from ..metrics import EvalReport
from ..nn import load_weights
from .triggers import utcnow

STAGES = ("staging", "production", "archived")
_LEGAL = {("staging", "production"), ("staging", "archived"),
          ("production", "archived")}


class RegistryError(ValueError):
    pass


class UnknownVersionError(RegistryError):
    pass


class IllegalTransitionError(RegistryError):
    pass


@dataclass
class ModelVersion:
    version_id: int
    stage: str
    weights_path: str
    eval: EvalReport
    trained_on_manifest_digest: str
    created_at: datetime


class Registry:
    """Single-writer registry; mutations are serialized through a lock and
    readers get consistent snapshots. Pass root=None for an in-memory
    registry (no journal, no weight verification against disk layout)."""

    def __init__(self, root: Path | str | None = None, verify_weights: bool = True):
        self._lock = threading.RLock()
        self._versions: dict[int, ModelVersion] = {}
        self._verify = verify_weights
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._journal = self.root / "journal.jsonl"
            self._evals_dir = self.root / "evals"
            self._evals_dir.mkdir(exist_ok=True)
            self._replay()
        else:
            self._journal = None

    # -- journal ----------------------------------------------------------

    def _append(self, event: dict) -> None:
        if self._journal is None:
            return
        with self._journal.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
            fh.flush()

    def _replay(self) -> None:
        if not self._journal.is_file():
            return
        for line in self._journal.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "register":
                report = EvalReport.load(self.root / event["eval_path"])
                self._versions[event["version"]] = ModelVersion(
                    version_id=event["version"], stage=event["stage"],
                    weights_path=event["weights_path"], eval=report,
                    trained_on_manifest_digest=event["digest"],
                    created_at=datetime.fromisoformat(event["at"]))
            elif event["event"] == "transition":
                version = self._versions[event["version"]]
                self._versions[event["version"]] = replace(version,
                                                           stage=event["stage"])

    # -- queries ----------------------------------------------------------

    def get(self, version_id: int) -> ModelVersion:
        with self._lock:
            if version_id not in self._versions:
                raise UnknownVersionError(f"no version {version_id}")
            return self._versions[version_id]

    def list_versions(self) -> list[ModelVersion]:
        with self._lock:
            return [self._versions[v] for v in sorted(self._versions)]

    def production(self) -> ModelVersion | None:
        with self._lock:
            live = [v for v in self._versions.values() if v.stage == "production"]
            return live[0] if live else None

    # -- mutations ---------------------------------------------------------

    def register(self, weights_path, eval_report: EvalReport,
                 manifest_digest: str) -> ModelVersion:
        """New version in staging; version ids increase monotonically."""
        weights_path = str(weights_path)
        if self._verify:
            load_weights(weights_path)  # reject unloadable weights up front
        with self._lock:
            version_id = max(self._versions, default=0) + 1
            created = utcnow()
            version = ModelVersion(version_id=version_id, stage="staging",
                                   weights_path=weights_path, eval=eval_report,
                                   trained_on_manifest_digest=manifest_digest,
                                   created_at=created)
            eval_rel = None
            if self.root is not None:
                eval_rel = f"evals/v{version_id}.json"
                eval_report.save(self.root / eval_rel)
            self._versions[version_id] = version
            self._append({"event": "register", "version": version_id,
                          "stage": "staging", "digest": manifest_digest,
                          "at": created.isoformat(),
                          "weights_path": weights_path, "eval_path": eval_rel})
            return version

    def transition(self, version_id: int, to_stage: str) -> ModelVersion:
        """Move a version between stages; promotion atomically archives the
        current production version."""
        if to_stage not in STAGES:
            raise IllegalTransitionError(f"unknown stage {to_stage!r}")
        with self._lock:
            version = self.get(version_id)
            if (version.stage, to_stage) not in _LEGAL:
                raise IllegalTransitionError(
                    f"illegal transition {version.stage} -> {to_stage} "
                    f"for version {version_id}")
            if to_stage == "production":
                live = self.production()
                if live is not None and live.version_id != version_id:
                    self._transition_unlocked(live.version_id, "archived")
            return self._transition_unlocked(version_id, to_stage)

    def _transition_unlocked(self, version_id: int, to_stage: str) -> ModelVersion:
        version = replace(self._versions[version_id], stage=to_stage)
        self._versions[version_id] = version
        self._append({"event": "transition", "version": version_id,
                      "stage": to_stage, "digest": version.trained_on_manifest_digest,
                      "at": utcnow().isoformat()})
        return version
