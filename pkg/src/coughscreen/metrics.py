"""Challenge scoring protocol: fixed-grid ROC, AUC, sensitivity/specificity.

The decision rule is ``predict positive iff score >= threshold``, evaluated on
the fixed grid {0.0000, 0.0001, ..., 1.0000} (10001 thresholds). Scores are
clamped into [0, 1] before grid evaluation; the pairwise oracle uses raw
scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SingleClassLabels, Unattainable

GRID_SIZE = 10001
DECISION_RULE = "score >= threshold"


def threshold_grid() -> np.ndarray:
    """The 10001 evaluation thresholds, both endpoints included."""
    return np.arange(GRID_SIZE, dtype=np.float64) / (GRID_SIZE - 1)


@dataclass(frozen=True)
class ScoredSet:
    """Classifier scores with their ground-truth binary labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels)
        if scores.ndim != 1 or labels.shape != scores.shape:
            raise ValueError("scores and labels must be 1-D and equally long")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels.astype(np.int8))

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.labels == 0))

    def require_both_classes(self) -> None:
        if self.n_positive == 0 or self.n_negative == 0:
            raise SingleClassLabels("need at least one positive and one negative label")


@dataclass(frozen=True)
class RocCurve:
    """(threshold, fpr, tpr) triples on the fixed grid, plus trapezoidal AUC."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    decision_rule: str = field(default=DECISION_RULE)

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))


def _rates_on_grid(s: ScoredSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """TPR and FPR at every grid threshold (vectorized exact counting)."""
    grid = threshold_grid()
    clamped = np.clip(s.scores, 0.0, 1.0)
    pos = np.sort(clamped[s.labels == 1])
    neg = np.sort(clamped[s.labels == 0])
    # count of scores >= t: len - first index where sorted score >= t
    tpr = (pos.size - np.searchsorted(pos, grid, side="left")) / pos.size
    fpr = (neg.size - np.searchsorted(neg, grid, side="left")) / neg.size
    return grid, fpr, tpr


def _trapezoid_auc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    """Area via trapezoids over deduplicated points sorted by (fpr, tpr),
    anchored at (0,0) and (1,1)."""
    pts = np.unique(np.column_stack([fpr, tpr]), axis=0)  # sorts lexicographically
    if not (pts[0] == [0.0, 0.0]).all():
        pts = np.vstack([[0.0, 0.0], pts])
    if not (pts[-1] == [1.0, 1.0]).all():
        pts = np.vstack([pts, [1.0, 1.0]])
    x, y = pts[:, 0], pts[:, 1]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def roc_curve(s: ScoredSet) -> RocCurve:
    s.require_both_classes()
    grid, fpr, tpr = _rates_on_grid(s)
    return RocCurve(thresholds=grid, fpr=fpr, tpr=tpr, auc=_trapezoid_auc(fpr, tpr))


def specificity_at_sensitivity(s: ScoredSet, target_tpr: float) -> tuple[float, float]:
    """Best (specificity, threshold) among grid thresholds with TPR >= target.

    Ties on specificity go to the largest threshold.
    """
    if not 0.0 < target_tpr <= 1.0:
        raise ValueError("target_tpr must be in (0, 1]")
    s.require_both_classes()
    grid, fpr, tpr = _rates_on_grid(s)
    eligible = tpr >= target_tpr
    if not eligible.any():  # unreachable: t=0 always gives TPR=1
        raise Unattainable(f"no grid threshold reaches TPR {target_tpr}")
    specificity = 1.0 - fpr
    best_spec = specificity[eligible].max()
    candidates = eligible & (specificity == best_spec)
    idx = int(np.nonzero(candidates)[0][-1])  # largest threshold wins ties
    return float(specificity[idx]), float(grid[idx])


def auc_pairwise_oracle(s: ScoredSet) -> float:
    """Exact probability-of-correct-ranking AUC, 0.5 credit for ties.

    Brute force over all positive/negative pairs on raw (unclamped) scores.
    Kept independent of roc_curve so the two can check each other.
    """
    s.require_both_classes()
    pos = s.scores[s.labels == 1]
    neg = s.scores[s.labels == 0]
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0)
    ties = np.count_nonzero(diff == 0)
    return float((wins + 0.5 * ties) / (pos.size * neg.size))


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    lines = ["threshold,fpr,tpr"]
    for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
        lines.append(f"{t:.4f},{float(f)!r},{float(r)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_json(path: str | Path, auc: float, sensitivity: float,
                       specificity: float, threshold: float) -> None:
    payload = {
        "auc": auc,
        "sensitivity": sensitivity,
        "specificity": specificity,
        "threshold": threshold,
        "decision_rule": DECISION_RULE,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
