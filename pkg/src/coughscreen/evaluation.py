"""Five-fold protocol: per-fold training, fold selection, ensembling, blind
scoring, and a synthetic data generator for desk-scale runs.

Fold id lists are plain text files (one id per line) so challenge-issued
lists drop in unchanged when a user has access to the real recordings.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import LabelMissing, MissingId
from .forest import Forest, ForestParams, predict_proba_batch, train_forest
from .metrics import ScoredSet, roc_curve, specificity_at_sensitivity
from .prep import Dataset, fit_scaler, transform_dataset
from .rng import child_generator, child_seed


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Order-preserving map, threaded when jobs > 1. Results must not depend
    on execution order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.fold_index < 1:
            raise ValueError("fold_index starts at 1")
        object.__setattr__(self, "train_ids", tuple(self.train_ids))
        object.__setattr__(self, "val_ids", tuple(self.val_ids))
        if set(self.train_ids) & set(self.val_ids):
            raise ValueError(f"fold {self.fold_index}: train and val ids overlap")
        if not self.train_ids or not self.val_ids:
            raise ValueError(f"fold {self.fold_index}: empty split")


@dataclass
class FoldResult:
    """Validation metrics for one fold, as percentages."""

    fold_index: int
    auc: float
    sensitivity: float      # the fixed target, e.g. 80.0
    specificity: float
    threshold: float
    model: Forest | None = None

    def to_dict(self, model_path: str | None = None) -> dict:
        d = {
            "fold": self.fold_index,
            "auc": self.auc,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "threshold": self.threshold,
        }
        if model_path is not None:
            d["model_path"] = model_path
        return d


def write_fold_files(out_dir: str | Path, splits: Iterable[FoldSplit]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split in splits:
        (out / f"train_fold_{split.fold_index}.txt").write_text(
            "\n".join(split.train_ids) + "\n")
        (out / f"val_fold_{split.fold_index}.txt").write_text(
            "\n".join(split.val_ids) + "\n")


def read_fold_files(fold_dir: str | Path, n_folds: int = 5) -> list[FoldSplit]:
    fold_dir = Path(fold_dir)
    splits = []
    for k in range(1, n_folds + 1):
        train = (fold_dir / f"train_fold_{k}.txt").read_text().split()
        val = (fold_dir / f"val_fold_{k}.txt").read_text().split()
        splits.append(FoldSplit(k, tuple(train), tuple(val)))
    return splits


def _check_ids(data: Dataset, split: FoldSplit) -> None:
    known = set(data.ids)
    for fid in (*split.train_ids, *split.val_ids):
        if fid not in known:
            raise MissingId(f"fold {split.fold_index}: id {fid!r} not in manifest")
    if data.labels is None:
        raise LabelMissing("fold protocol needs labeled data")
    covered = set(split.train_ids) | set(split.val_ids)
    if covered != known:
        raise ValueError(
            f"fold {split.fold_index}: split does not cover the development set")


def run_fold(data: Dataset, split: FoldSplit, params: ForestParams,
             sensitivity_target: float = 0.8, scaler_scope: str = "train",
             l2: bool = True, seed: int = 42) -> FoldResult:
    _check_ids(data, split)
    train = data.subset(split.train_ids)
    val = data.subset(split.val_ids)
    if scaler_scope == "all":
        fit_on = data.subset(split.train_ids + split.val_ids)
    elif scaler_scope == "train":
        fit_on = train
    else:
        raise ValueError(f"unknown scaler scope {scaler_scope!r}")
    scaler = fit_scaler(fit_on)
    # leakage bookkeeping: in train scope the scaler must have seen train rows only
    assert scaler.fitted_on == len(fit_on.ids)
    if scaler_scope == "train":
        assert set(fit_on.ids).isdisjoint(split.val_ids)

    fold_params = replace(params, seed=child_seed(seed, f"fold-{split.fold_index}"))
    train_t = transform_dataset(train, scaler, l2=l2)
    val_t = transform_dataset(val, scaler, l2=l2)
    model = train_forest(train_t.features, train_t.labels, fold_params)
    model = model.with_scaler(scaler, l2_normalize=l2)

    scored = ScoredSet(predict_proba_batch(model, val_t.features), val_t.labels)
    auc = roc_curve(scored).auc
    spec, thr = specificity_at_sensitivity(scored, sensitivity_target)
    return FoldResult(
        fold_index=split.fold_index,
        auc=100.0 * auc,
        sensitivity=100.0 * sensitivity_target,
        specificity=100.0 * spec,
        threshold=thr,
        model=model,
    )


def run_folds(data: Dataset, splits: Sequence[FoldSplit], params: ForestParams,
              sensitivity_target: float = 0.8, scaler_scope: str = "train",
              l2: bool = True, seed: int = 42, jobs: int = 1) -> list[FoldResult]:
    results = parallel_map(
        lambda split: run_fold(data, split, params, sensitivity_target,
                               scaler_scope, l2, seed),
        list(splits), jobs=jobs)
    return sorted(results, key=lambda r: r.fold_index)


def average_row(results: Sequence[FoldResult]) -> dict:
    return {
        "auc": float(np.mean([r.auc for r in results])),
        "sensitivity": float(np.mean([r.sensitivity for r in results])),
        "specificity": float(np.mean([r.specificity for r in results])),
    }


def select_best_fold(results: Sequence[FoldResult]) -> FoldResult:
    """Highest AUC; ties go to higher specificity, then lower fold index."""
    if not results:
        raise ValueError("no fold results")
    return min(results, key=lambda r: (-r.auc, -r.specificity, r.fold_index))


def ensemble_weights(val_aucs: Sequence[float]) -> np.ndarray:
    """Per-fold weights proportional to validation AUC, normalized to sum 1."""
    w = np.asarray(val_aucs, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("AUC weights must be nonnegative")
    total = w.sum()
    if total == 0:
        return np.full(w.shape, 1.0 / w.size)
    return w / total


def score_blind(models: Sequence[Forest], blind: Dataset,
                weights: Sequence[float] | None = None) -> np.ndarray:
    """Weighted mean of per-model probabilities; each model applies its own
    stored scaler before predicting."""
    if not models:
        raise ValueError("need at least one model")
    if weights is None:
        w = np.full(len(models), 1.0 / len(models))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(models),):
            raise ValueError("one weight per model required")
        w = w / w.sum()
    scores = np.zeros(blind.n)
    for model, weight in zip(models, w):
        if model.scaler is None:
            raise ValueError("model carries no scaler; cannot score raw features")
        feats = transform_dataset(blind, model.scaler, l2=model.l2_normalize).features
        scores += weight * predict_proba_batch(model, feats)
    return scores


def write_scores_csv(path: str | Path, ids: Sequence[str], scores: np.ndarray) -> None:
    lines = ["id,score"]
    for fid, score in zip(ids, scores):
        lines.append(f"{fid},{score:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_results_json(path: str | Path, results: Sequence[FoldResult],
                       model_paths: Sequence[str] | None = None) -> None:
    folds = []
    for i, res in enumerate(results):
        folds.append(res.to_dict(model_paths[i] if model_paths else None))
    payload = {"folds": folds, "average": average_row(results)}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def make_synthetic(n: int, dim: int, imbalance: float = 0.1,
                   separation: float = 6.0, seed: int = 42,
                   n_folds: int = 5) -> tuple[Dataset, list[FoldSplit]]:
    """Two unit-variance spherical Gaussian classes whose means sit
    ``separation`` standard deviations apart along the first axis, plus
    stratified fold splits."""
    if n < 50:
        raise ValueError("need n >= 50")
    if not 0.0 < imbalance < 1.0:
        raise ValueError("imbalance must be in (0, 1)")
    n_pos = max(1, round(n * imbalance))
    if n_pos < n_folds or (n - n_pos) < n_folds:
        raise ValueError("too few samples in one class to stratify the folds")
    rng = child_generator(seed, "synth")

    labels = np.zeros(n, dtype=np.int8)
    labels[:n_pos] = 1
    rng.shuffle(labels)
    features = rng.standard_normal((n, dim))
    features[:, 0] += np.where(labels == 1, separation / 2.0, -separation / 2.0)
    ids = [f"synth-{i:04d}" for i in range(n)]
    data = Dataset(features, labels, ids)

    splits = []
    pos_idx = rng.permutation(np.nonzero(labels == 1)[0])
    neg_idx = rng.permutation(np.nonzero(labels == 0)[0])
    pos_chunks = np.array_split(pos_idx, n_folds)
    neg_chunks = np.array_split(neg_idx, n_folds)
    for k in range(n_folds):
        val = np.sort(np.concatenate([pos_chunks[k], neg_chunks[k]]))
        val_set = set(val.tolist())
        train = [ids[i] for i in range(n) if i not in val_set]
        splits.append(FoldSplit(k + 1, tuple(train), tuple(ids[i] for i in val)))
    return data, splits
