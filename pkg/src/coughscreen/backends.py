"""Pluggable embedding backends and the per-file extraction pipeline.

Two backend sources exist: AEM1 interchange model files (real inference) and
directories of precomputed EMB1 matrices (keyed by file id), which keep the
whole pipeline testable without any inference runtime. A backend manifest is
a JSON list; entries carry {"id", "output_dim", "sample_rate"} plus either
"model_path" or "embeddings_dir".

When the two built-in dimensions (6144 and 1024) are both active the
6144-dim backend always comes first, so positions 0..6143 of every pooled
vector have a fixed meaning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .audio import AudioClip, FeatureVector, pad_to_duration, pool_and_concat, resample
from .emb1 import read_emb1
from .errors import BackendFailure, DimensionMismatch, MissingFeatures
from .interchange import InterchangeModel, load_model

BUILTIN_DIMS = (6144, 1024)
MIN_WINDOW_SECONDS = 1.0


class EmbeddingBackend(Protocol):
    id: str
    output_dim: int
    required_sample_rate: int

    def embed(self, clip: AudioClip) -> np.ndarray: ...


@dataclass
class PrecomputedBackend:
    """Serves stored per-second embeddings from ``<dir>/<file_id>.<id>.emb``."""

    id: str
    output_dim: int
    required_sample_rate: int
    embeddings_dir: Path

    def embed(self, clip: AudioClip) -> np.ndarray:
        if clip.file_id is None:
            raise MissingFeatures("precomputed backend needs a file id on the clip")
        path = self.embeddings_dir / f"{clip.file_id}.{self.id}.emb"
        if not path.exists():
            raise MissingFeatures(f"no stored embedding for {clip.file_id}: {path}")
        return read_emb1(path)


@dataclass
class InterchangeBackend:
    id: str
    output_dim: int
    required_sample_rate: int
    model: InterchangeModel

    def embed(self, clip: AudioClip) -> np.ndarray:
        return self.model.embed_waveform(clip.samples)


def embed(backend: EmbeddingBackend, clip: AudioClip) -> np.ndarray:
    """Pad to the 1 s minimum window, resample to the backend's native rate,
    run inference, and validate the result."""
    clip = pad_to_duration(clip, MIN_WINDOW_SECONDS)
    clip = resample(clip, backend.required_sample_rate)
    try:
        matrix = np.asarray(backend.embed(clip))
    except (DimensionMismatch, MissingFeatures):
        raise
    except BackendFailure:
        raise
    except Exception as exc:
        raise BackendFailure(f"backend {backend.id} failed: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise BackendFailure(f"backend {backend.id} returned shape {matrix.shape}")
    if matrix.shape[1] != backend.output_dim:
        raise DimensionMismatch(
            f"backend {backend.id}: output dim {matrix.shape[1]} != "
            f"declared {backend.output_dim}")
    if not np.all(np.isfinite(matrix)):
        raise BackendFailure(f"backend {backend.id} produced NaN/Inf")
    return matrix


def extract_features(backends: list[EmbeddingBackend], clip: AudioClip,
                     ) -> tuple[FeatureVector, list[np.ndarray]]:
    """Pooled feature vector plus the raw per-backend matrices."""
    matrices = [embed(backend, clip) for backend in backends]
    return pool_and_concat(matrices, file_id=clip.file_id), matrices


def _check_builtin_order(backends: list[EmbeddingBackend]) -> None:
    dims = [b.output_dim for b in backends]
    if sorted(dims) == sorted(BUILTIN_DIMS) and tuple(dims) != BUILTIN_DIMS:
        raise ValueError(
            "built-in backends must be listed 6144-dim first, then 1024-dim")


def load_backends(manifest_path: str | Path) -> list[EmbeddingBackend]:
    manifest_path = Path(manifest_path)
    entries = json.loads(manifest_path.read_text())
    backends: list[EmbeddingBackend] = []
    for entry in entries:
        backend_id = entry["id"]
        output_dim = int(entry["output_dim"])
        rate = int(entry["sample_rate"])
        if "model_path" in entry:
            model_path = Path(entry["model_path"])
            if not model_path.is_absolute():
                model_path = manifest_path.parent / model_path
            model = load_model(model_path)
            if model.output_dim != output_dim:
                raise DimensionMismatch(
                    f"backend {backend_id}: manifest says {output_dim}, "
                    f"model file says {model.output_dim}")
            backends.append(InterchangeBackend(backend_id, output_dim, rate, model))
        elif "embeddings_dir" in entry:
            emb_dir = Path(entry["embeddings_dir"])
            if not emb_dir.is_absolute():
                emb_dir = manifest_path.parent / emb_dir
            backends.append(PrecomputedBackend(backend_id, output_dim, rate, emb_dir))
        else:
            raise ValueError(
                f"backend {backend_id}: need model_path or embeddings_dir")
    if not backends:
        raise ValueError("backend manifest is empty")
    _check_builtin_order(backends)
    return backends
