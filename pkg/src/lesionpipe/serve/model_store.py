"""The serving-side model holder: an immutable snapshot behind an
atomically swappable reference. Request handlers read the reference once
and serve that snapshot end to end, so a concurrent swap never mixes
weights within one response."""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from ..nn import NetworkConfig, ParameterSet, forward, load_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelSnapshot:
    version_id: int
    params: ParameterSet
    config: NetworkConfig
    normalize_mode: str = "unit"

    @classmethod
    def from_weights_file(cls, version_id: int, path,
                          normalize_mode: str = "unit") -> "ModelSnapshot":
        params, config = load_weights(path)
        return cls(version_id=version_id, params=params, config=config,
                   normalize_mode=normalize_mode)


class ModelStore:
    def __init__(self, snapshot: ModelSnapshot | None = None):
        self._snapshot = snapshot
        self._swap_lock = threading.Lock()

    def snapshot(self) -> ModelSnapshot | None:
        return self._snapshot  # single reference read; atomic under the GIL

    def hot_swap(self, snapshot: ModelSnapshot) -> bool:
        """Self-test the snapshot, then publish it. In-flight requests keep
        the snapshot they already read; a failed self-test leaves the old
        model serving and returns False."""
        with self._swap_lock:
            try:
                probe = np.zeros((1,) + tuple(snapshot.config.input_shape),
                                 dtype=np.float32)
                probs = forward(snapshot.params, snapshot.config, probe)
                if not np.all(np.isfinite(probs)):
                    raise ValueError("self-test produced non-finite output")
            except Exception:
                logger.exception("hot swap self-test failed; keeping version %s",
                                 self._snapshot.version_id if self._snapshot else None)
                return False
            self._snapshot = snapshot
            return True
