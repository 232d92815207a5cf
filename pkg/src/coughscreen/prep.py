"""Feature standardization, L2 normalization, and labeled dataset assembly.

Order of operations is fixed: standardize first, then L2-normalize. Standard
deviation uses the population (N) divisor; std 0 columns divide by 1. The
scaler is fit on the training split of each fold only (``--scaler-scope all``
preserves the joint-fit alternative).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .emb1 import read_emb1
from .errors import DimensionMismatch, MissingFeatures, TooFewSamples


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray
    fitted_on: int

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("mean and std must be 1-D and equally long")
        if np.any(std < 0):
            raise ValueError("std entries must be >= 0")
        if self.fitted_on < 2:
            raise ValueError("scaler must be fit on >= 2 vectors")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            fitted_on=int(d["fitted_on"]),
        )


@dataclass
class Dataset:
    """N feature vectors with ids and (optionally missing) binary labels."""

    features: np.ndarray            # N x D float64
    labels: np.ndarray | None      # N values in {0,1}, or None for blind data
    ids: list[str]

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be N x D")
        n = self.features.shape[0]
        if len(self.ids) != n:
            raise ValueError("ids length must match feature rows")
        if len(set(self.ids)) != n:
            raise ValueError("ids must be unique")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN/Inf")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (n,):
                raise ValueError("labels length must match feature rows")
            if not np.all((self.labels == 0) | (self.labels == 1)):
                raise ValueError("labels must be 0 or 1")
            self.labels = self.labels.astype(np.int8)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, wanted_ids: Sequence[str]) -> "Dataset":
        index = {fid: i for i, fid in enumerate(self.ids)}
        rows = [index[fid] for fid in wanted_ids]
        labels = self.labels[rows] if self.labels is not None else None
        return Dataset(self.features[rows], labels, list(wanted_ids))


def fit_scaler(train: Dataset) -> ScalerParams:
    """Per-column sample mean and population (N-divisor) standard deviation."""
    if train.n < 2:
        raise TooFewSamples(f"need >= 2 vectors to fit a scaler, got {train.n}")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)  # ddof=0: population divisor
    # mean accumulation rounding can leave a constant column with std ~ 1e-16,
    # which standardization would amplify to +-1; exact constancy wins
    constant = np.ptp(train.features, axis=0) == 0.0
    std = np.where(constant, 0.0, std)
    return ScalerParams(mean=mean, std=std, fitted_on=train.n)


def transform(vec: np.ndarray, scaler: ScalerParams, l2: bool = True) -> np.ndarray:
    """Standardize, then optionally L2-normalize. Accepts one vector or a matrix."""
    arr = np.asarray(vec, dtype=np.float64)
    if arr.shape[-1] != scaler.mean.shape[0]:
        raise DimensionMismatch(
            f"vector dim {arr.shape[-1]} != scaler dim {scaler.mean.shape[0]}")
    divisor = np.where(scaler.std == 0.0, 1.0, scaler.std)
    out = (arr - scaler.mean) / divisor
    if l2:
        # rescale by the max magnitude first so the squared sum can neither
        # underflow (tiny vectors) nor overflow; zero vectors pass through
        scale = np.max(np.abs(out), axis=-1, keepdims=True)
        safe_scale = np.where(scale > 0, scale, 1.0)
        scaled = out / safe_scale
        norm = np.linalg.norm(scaled, axis=-1, keepdims=True)
        out = np.where(scale > 0, scaled / np.where(norm > 0, norm, 1.0), out)
    return out


def transform_dataset(data: Dataset, scaler: ScalerParams, l2: bool = True) -> Dataset:
    return Dataset(transform(data.features, scaler, l2=l2), data.labels, list(data.ids))


def load_manifest(path: str | Path) -> Dataset:
    """Read a dataset manifest: list of {"id", "label": 0|1|null, "features": path|inline}.

    Feature paths are resolved relative to the manifest file and must be
    1-row EMB1 files (pooled vectors). Labels may be null for blind data;
    a manifest mixing labeled and unlabeled entries is rejected.
    """
    path = Path(path)
    entries = json.loads(path.read_text())
    ids: list[str] = []
    rows: list[np.ndarray] = []
    labels: list[int | None] = []
    for entry in entries:
        ids.append(str(entry["id"]))
        labels.append(entry["label"])
        feat = entry["features"]
        if isinstance(feat, str):
            feat_path = Path(feat)
            if not feat_path.is_absolute():
                feat_path = path.parent / feat_path
            if not feat_path.exists():
                raise MissingFeatures(f"feature file not found for id {entry['id']}: {feat_path}")
            mat = read_emb1(feat_path)
            if mat.shape[0] != 1:
                raise ValueError(
                    f"manifest feature file for {entry['id']} must have 1 row, got {mat.shape[0]}")
            rows.append(mat[0].astype(np.float64))
        else:
            rows.append(np.asarray(feat, dtype=np.float64))
    labeled = [lab for lab in labels if lab is not None]
    if labeled and len(labeled) != len(labels):
        raise ValueError("manifest mixes labeled and unlabeled entries")
    label_arr = np.asarray(labeled, dtype=np.int8) if labeled else None
    return Dataset(np.vstack(rows), label_arr, ids)


def write_manifest(path: str | Path, ids: Sequence[str],
                   labels: Sequence[int] | None,
                   features: np.ndarray | Sequence[str]) -> None:
    """Write a dataset manifest with inline features (ndarray) or file paths."""
    entries = []
    for i, fid in enumerate(ids):
        label = None if labels is None else int(labels[i])
        feat = features[i]
        if isinstance(feat, np.ndarray):
            feat = feat.tolist()
        entries.append({"id": fid, "label": label, "features": feat})
    Path(path).write_text(json.dumps(entries) + "\n")
