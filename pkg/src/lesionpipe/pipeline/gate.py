"""Candidate-vs-incumbent promotion gate.

A candidate is accepted when it is at least as good as the incumbent
within slack (accuracy and AUC) and treats both classes comparably
(benign recall vs malignant recall within the gap limit). With no
incumbent only the parity clause applies. Reports must come from the same
frozen test set; a digest mismatch refuses to gate rather than rejecting.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..metrics import EvalReport, benign_recall

ACCURACY_REGRESSION = "ACCURACY_REGRESSION"
AUC_REGRESSION = "AUC_REGRESSION"
CLASS_PARITY = "CLASS_PARITY"
PARITY_UNDEFINED = "PARITY_UNDEFINED"


class GateDigestError(ValueError):
    """Candidate and incumbent were evaluated on different test sets."""


@dataclass
class GateConfig:
    accuracy_slack: float = 0.005
    recall_gap_limit: float = 0.15
    auc_slack: float = 0.01

    def __post_init__(self):
        for name in ("accuracy_slack", "recall_gap_limit", "auc_slack"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "GateConfig":
        return cls(**{k: d[k] for k in
                      ("accuracy_slack", "recall_gap_limit", "auc_slack") if k in d})


@dataclass
class GateDecision:
    accepted: bool
    reasons: list[str]  # empty when accepted

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "reasons": self.reasons}


def gate_candidate(candidate: EvalReport, incumbent: EvalReport | None,
                   cfg: GateConfig | None = None) -> GateDecision:
    cfg = cfg or GateConfig()
    if incumbent is not None and candidate.test_digest != incumbent.test_digest:
        raise GateDigestError(
            f"candidate evaluated on {candidate.test_digest}, incumbent on "
            f"{incumbent.test_digest}; refusing to gate")

    reasons: list[str] = []
    if incumbent is not None:
        if candidate.accuracy < incumbent.accuracy - cfg.accuracy_slack:
            reasons.append(ACCURACY_REGRESSION)
        if candidate.auc < incumbent.auc - cfg.auc_slack:
            reasons.append(AUC_REGRESSION)

    recall_b = benign_recall(candidate.matrix)
    recall_m = candidate.recall
    if recall_b is None or recall_m is None:
        reasons.append(PARITY_UNDEFINED)
    elif abs(recall_b - recall_m) > cfg.recall_gap_limit:
        reasons.append(CLASS_PARITY)

    return GateDecision(accepted=not reasons, reasons=reasons)
