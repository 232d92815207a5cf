"""Builders for small AEM1 interchange models used across tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from coughscreen.interchange import encode_tensor


def triangular_mel_matrix(n_bins: int, n_mels: int) -> np.ndarray:
    """Simple overlapping triangular bank; exact shape is irrelevant to the
    executor, it only matmuls whatever is baked in."""
    centers = np.linspace(0, n_bins - 1, n_mels + 2)
    bank = np.zeros((n_bins, n_mels), dtype=np.float32)
    for m in range(n_mels):
        lo, mid, hi = centers[m], centers[m + 1], centers[m + 2]
        bins = np.arange(n_bins)
        up = (bins - lo) / max(mid - lo, 1e-6)
        down = (hi - bins) / max(hi - mid, 1e-6)
        bank[:, m] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def make_model_dict(model_id: str, output_dim: int, sample_rate: int = 4000,
                    n_mels: int = 16, channels: int = 4, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    frame_length, hop = 200, 100
    fft_length = 256
    n_bins = fft_length // 2 + 1
    conv_kernel = rng.normal(0, 0.3, (3, 3, 1, channels)).astype(np.float32)
    conv_bias = rng.normal(0, 0.1, channels).astype(np.float32)
    dense_kernel = rng.normal(0, 0.3, (channels, output_dim)).astype(np.float32)
    dense_bias = rng.normal(0, 0.1, output_dim).astype(np.float32)
    return {
        "format": "AEM1",
        "format_version": 1,
        "id": model_id,
        "sample_rate": sample_rate,
        "output_dim": output_dim,
        "frontend": {
            "type": "log_mel",
            "frame_length": frame_length,
            "hop_length": hop,
            "fft_length": fft_length,
            "log_offset": 0.001,
            "window": "hann",
            "mel_matrix": encode_tensor(triangular_mel_matrix(n_bins, n_mels)),
        },
        "layers": [
            {"type": "conv2d", "strides": [2, 2], "padding": "same",
             "activation": "relu", "kernel": encode_tensor(conv_kernel),
             "bias": encode_tensor(conv_bias)},
            {"type": "maxpool2d", "pool": [2, 2], "strides": [2, 2],
             "padding": "valid"},
            {"type": "global_avg_pool"},
            {"type": "dense", "activation": "linear",
             "kernel": encode_tensor(dense_kernel),
             "bias": encode_tensor(dense_bias)},
        ],
    }


def write_model(path: Path, model_id: str, output_dim: int, **kwargs) -> Path:
    path.write_text(json.dumps(make_model_dict(model_id, output_dim, **kwargs)))
    return path
