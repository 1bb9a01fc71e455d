"""Imbalance-aware evaluation: confusion matrix, precision/recall/F1,
accuracy, ROC/AUC, and per-subgroup bias reporting.

Malignant is the positive class throughout; a score exactly at the
threshold predicts malignant. Undefined precision/recall are reported as
None, never silently substituted, since the promotion gate consumes these
numbers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_THRESHOLD = 0.5
MIN_SUBGROUP_SIZE = 10


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}

    @classmethod
    def from_dict(cls, d: dict) -> "ConfusionMatrix":
        return cls(tp=int(d["tp"]), fp=int(d["fp"]), tn=int(d["tn"]), fn=int(d["fn"]))


@dataclass
class RocCurve:
    points: list[tuple[float, float]]  # (fpr, tpr), (0,0) first, (1,1) last
    thresholds: list[float]


def confusion_matrix(scores, labels, threshold: float = DEFAULT_THRESHOLD
                     ) -> ConfusionMatrix:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    pred = scores >= threshold
    pos = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean 2pr/(p+r)."""
    if precision + recall == 0:
        raise ValueError("F1 undefined when precision + recall is zero")
    return 2 * precision * recall / (precision + recall)


def precision_recall_f1(matrix: ConfusionMatrix
                        ) -> tuple[float | None, float | None, float | None]:
    precision = matrix.tp / (matrix.tp + matrix.fp) if matrix.tp + matrix.fp else None
    recall = matrix.tp / (matrix.tp + matrix.fn) if matrix.tp + matrix.fn else None
    if precision is None or recall is None or precision + recall == 0:
        return precision, recall, None
    return precision, recall, f1_score(precision, recall)


def accuracy(matrix: ConfusionMatrix) -> float:
    if matrix.total == 0:
        raise ValueError("empty confusion matrix")
    return (matrix.tp + matrix.tn) / matrix.total


def benign_recall(matrix: ConfusionMatrix) -> float | None:
    """Specificity: how often benign lesions are called benign."""
    denom = matrix.tn + matrix.fp
    return matrix.tn / denom if denom else None


def roc_curve(scores, labels) -> RocCurve:
    """Threshold sweep over the unique scores in descending order, with a
    sentinel above the max so the curve starts at (0, 0)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(np.int64)

    points = [(0.0, 0.0)]
    thresholds = [float("inf")]
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        t = sorted_scores[i]
        # samples tied at this score enter the sweep together
        while i < n and sorted_scores[i] == t:
            tp += sorted_pos[i]
            fp += 1 - sorted_pos[i]
            i += 1
        points.append((fp / n_neg, tp / n_pos))
        thresholds.append(float(t))
    return RocCurve(points=points, thresholds=thresholds)


def auc(roc: RocCurve) -> float:
    """Trapezoidal area under the ROC points."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(roc.points, roc.points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


@dataclass
class GroupStats:
    matrix: ConfusionMatrix
    accuracy: float
    count: int
    small: bool  # below the minimum size for gap reporting

    def to_dict(self) -> dict:
        d = self.matrix.to_dict()
        d.update({"accuracy": self.accuracy, "count": self.count, "small": self.small})
        return d


@dataclass
class SubgroupReport:
    group_key: str
    groups: dict[str, GroupStats]
    max_accuracy_gap: float | None  # across groups meeting the minimum size

    def to_dict(self) -> dict:
        return {"group_key": self.group_key,
                "max_accuracy_gap": self.max_accuracy_gap,
                "groups": {k: v.to_dict() for k, v in self.groups.items()}}


def subgroup_report(scores, labels, metadata: list[dict], group_key: str,
                    threshold: float = DEFAULT_THRESHOLD,
                    min_group_size: int = MIN_SUBGROUP_SIZE) -> SubgroupReport:
    """Per-group confusion and accuracy; samples missing the key fall into
    an "unknown" group. Groups smaller than min_group_size are reported but
    flagged and excluded from the max pairwise gap."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    buckets: dict[str, list[int]] = {}
    for i, meta in enumerate(metadata):
        key = str(meta.get(group_key, "unknown")) if meta else "unknown"
        buckets.setdefault(key, []).append(i)

    groups: dict[str, GroupStats] = {}
    for name, idxs in sorted(buckets.items()):
        sub = confusion_matrix(scores[idxs], labels[idxs], threshold)
        groups[name] = GroupStats(matrix=sub, accuracy=accuracy(sub),
                                  count=len(idxs), small=len(idxs) < min_group_size)

    eligible = [g.accuracy for g in groups.values() if not g.small]
    gap = max(eligible) - min(eligible) if len(eligible) >= 2 else (
        0.0 if len(eligible) == 1 else None)
    return SubgroupReport(group_key=group_key, groups=groups, max_accuracy_gap=gap)


@dataclass
class EvalReport:
    matrix: ConfusionMatrix
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float
    auc: float
    roc: RocCurve
    subgroups: dict[str, SubgroupReport] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    test_digest: str | None = None

    def to_dict(self) -> dict:
        d = self.matrix.to_dict()
        d.update({
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "roc": [[fpr, tpr] for fpr, tpr in self.roc.points],
            "subgroups": {k: v.to_dict() for k, v in self.subgroups.items()},
            "threshold": self.threshold,
            "test_digest": self.test_digest,
        })
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        roc = RocCurve(points=[(float(p[0]), float(p[1])) for p in d["roc"]],
                       thresholds=[])
        subgroups = {}
        for key, sub in d.get("subgroups", {}).items():
            groups = {name: GroupStats(matrix=ConfusionMatrix.from_dict(g),
                                       accuracy=float(g["accuracy"]),
                                       count=int(g["count"]),
                                       small=bool(g["small"]))
                      for name, g in sub["groups"].items()}
            subgroups[key] = SubgroupReport(group_key=key, groups=groups,
                                            max_accuracy_gap=sub["max_accuracy_gap"])
        return cls(matrix=ConfusionMatrix.from_dict(d),
                   precision=d["precision"], recall=d["recall"], f1=d["f1"],
                   accuracy=float(d["accuracy"]), auc=float(d["auc"]), roc=roc,
                   subgroups=subgroups,
                   threshold=float(d.get("threshold", DEFAULT_THRESHOLD)),
                   test_digest=d.get("test_digest"))

    @classmethod
    def load(cls, path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def evaluate(scores, labels, metadata: list[dict] | None = None,
             group_keys: tuple[str, ...] = (),
             threshold: float = DEFAULT_THRESHOLD,
             test_digest: str | None = None) -> EvalReport:
    """Full report: matrix-derived metrics plus ROC/AUC and any requested
    subgroup breakdowns."""
    matrix = confusion_matrix(scores, labels, threshold)
    precision, recall, f1 = precision_recall_f1(matrix)
    curve = roc_curve(scores, labels)
    subgroups = {}
    if metadata is not None:
        for key in group_keys:
            subgroups[key] = subgroup_report(scores, labels, metadata, key,
                                             threshold)
    return EvalReport(matrix=matrix, precision=precision, recall=recall, f1=f1,
                      accuracy=accuracy(matrix), auc=auc(curve), roc=curve,
                      subgroups=subgroups, threshold=threshold,
                      test_digest=test_digest)
