"""Identity accuracy: optimal cluster <-> ground-truth matching over the
confusion counts, plus per-identity recall and a JSON-able report."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assign import solve_max
from .errors import ConfigError, CoverageError, DataError
from .store import UNKNOWN


@dataclass
class EvalReport:
    confusion: np.ndarray  # (k, k) counts, rows = cluster, cols = identity
    matching: dict[int, int]  # cluster -> identity bijection
    accuracy: float
    per_identity_recall: np.ndarray  # (k,) float; NaN for absent identities
    n_scored: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "n_scored": self.n_scored,
            "matching": {str(c): int(g) for c, g in sorted(self.matching.items())},
            "per_identity_recall": [
                None if np.isnan(r) else float(r) for r in self.per_identity_recall
            ],
            "confusion": self.confusion.tolist(),
        }


def evaluate(assignments, gt_labels, n_identities: int) -> EvalReport:
    """Accuracy = matched detections / all detections under the Hungarian-
    optimal cluster -> identity bijection."""
    pred = np.asarray(assignments, dtype=np.int64)
    gt = np.asarray(gt_labels, dtype=np.int64)
    if n_identities < 1:
        raise ConfigError(f"n_identities must be >= 1, got {n_identities}")
    if pred.shape != gt.shape or pred.ndim != 1:
        raise ConfigError(f"assignments {pred.shape} and labels {gt.shape} must be 1-D and equal")
    if pred.size == 0:
        raise ConfigError("nothing to score")
    if np.any(gt == UNKNOWN) or np.any(gt < 0):
        raise CoverageError("ground truth labels must be known for all scored detections")
    if gt.max() >= n_identities or pred.min() < 0 or pred.max() >= n_identities:
        raise DataError("cluster indices and labels must lie in 0..n_identities-1")

    k = n_identities
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (pred, gt), 1)

    result = solve_max(confusion.astype(np.float64))
    matching = {c: g for c, g in result.pairs}
    matched = sum(int(confusion[c, g]) for c, g in result.pairs)
    total = int(confusion.sum())

    recall = np.full(k, np.nan)
    identity_of = {g: c for c, g in matching.items()}
    class_counts = confusion.sum(axis=0)
    for g in range(k):
        if class_counts[g] > 0:
            recall[g] = confusion[identity_of[g], g] / class_counts[g]

    return EvalReport(
        confusion=confusion,
        matching=matching,
        accuracy=matched / total,
        per_identity_recall=recall,
        n_scored=total,
    )


def format_table(report: EvalReport) -> str:
    """Human-readable summary for standard output."""
    lines = [
        f"accuracy: {report.accuracy:.4f}  ({report.n_scored} detections)",
        "cluster -> identity: "
        + ", ".join(f"{c}->{g}" for c, g in sorted(report.matching.items())),
        "identity  recall",
    ]
    for g, r in enumerate(report.per_identity_recall):
        lines.append(f"{g:>8}  {'-' if np.isnan(r) else f'{r:.4f}'}")
    return "\n".join(lines)
