"""Executor for AEM1 interchange embedding models.

AEM1 is a self-contained JSON container: a log-mel frontend with the mel
filterbank baked in as weights, followed by a flat list of layers
(conv2d / maxpool2d / global_avg_pool / dense). Weights are base64-encoded
little-endian float32. Batch norm never appears here: exporters fold it into
the preceding convolution.

The model consumes raw waveform at its declared sample rate, split into
non-overlapping one-second windows (the last window zero-padded at the end),
and emits one embedding row per window. The frontend FFT is computed in
float64 (independent FFT implementations agree to ~1e-14 there, while
float32 FFTs do not), magnitudes are cast to float32, and everything after
the cast runs in float32; independent runtimes then match to well under the
1e-4 parity budget.

Padding arithmetic for "same" follows the TensorFlow convention:
``out = ceil(in / stride)`` with any odd padding going to the bottom/right.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BackendFailure, CorruptModelFile, DimensionMismatch, VersionMismatch

FORMAT = "AEM1"
FORMAT_VERSION = 1


def decode_tensor(spec: dict) -> np.ndarray:
    data = base64.b64decode(spec["data"])
    arr = np.frombuffer(data, dtype="<f4").astype(np.float32)
    return arr.reshape(spec["shape"])


def encode_tensor(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    return {"shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _same_pad(size: int, kernel: int, stride: int) -> tuple[int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, np.float32(0.0))


def _apply_activation(x: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return _relu(x)
    if name == "linear":
        return x
    raise CorruptModelFile(f"unknown activation {name!r}")


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray,
           strides: tuple[int, int], padding: str) -> np.ndarray:
    kh, kw, _, _ = kernel.shape
    sh, sw = strides
    if padding == "same":
        (pt, pb), (pl, pr) = _same_pad(x.shape[0], kh, sh), _same_pad(x.shape[1], kw, sw)
        x = np.pad(x, ((pt, pb), (pl, pr), (0, 0)))
    elif padding != "valid":
        raise CorruptModelFile(f"unknown padding {padding!r}")
    windows = sliding_window_view(x, (kh, kw), axis=(0, 1))[::sh, ::sw]
    out = np.tensordot(windows.astype(np.float32), kernel, axes=([2, 3, 4], [2, 0, 1]))
    return out + bias


def maxpool2d(x: np.ndarray, pool: tuple[int, int], strides: tuple[int, int],
              padding: str) -> np.ndarray:
    ph, pw = pool
    sh, sw = strides
    if padding == "same":
        (pt, pb), (pl, pr) = _same_pad(x.shape[0], ph, sh), _same_pad(x.shape[1], pw, sw)
        x = np.pad(x, ((pt, pb), (pl, pr), (0, 0)), constant_values=-np.inf)
    elif padding != "valid":
        raise CorruptModelFile(f"unknown padding {padding!r}")
    windows = sliding_window_view(x, (ph, pw), axis=(0, 1))[::sh, ::sw]
    return windows.max(axis=(3, 4)).astype(np.float32)


@dataclass
class InterchangeModel:
    model_id: str
    sample_rate: int
    output_dim: int
    frontend: dict
    mel_matrix: np.ndarray
    layers: list[dict]

    def _log_mel(self, window: np.ndarray) -> np.ndarray:
        fe = self.frontend
        frame_len = fe["frame_length"]
        hop = fe["hop_length"]
        fft_len = fe["fft_length"]
        n_frames = 1 + (window.size - frame_len) // hop
        frames = sliding_window_view(window, frame_len)[::hop][:n_frames]
        # periodic Hann; framing and FFT run in float64 by format contract
        hann = (0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(frame_len) / frame_len))
        frames = frames.astype(np.float64) * hann
        spectrum = np.abs(np.fft.rfft(frames, n=fft_len, axis=1)).astype(np.float32)
        mel = spectrum @ self.mel_matrix
        return np.log(mel + np.float32(fe["log_offset"]))

    def _run_layers(self, feats: np.ndarray) -> np.ndarray:
        x = feats[:, :, None].astype(np.float32)    # (frames, mels, 1)
        for layer in self.layers:
            kind = layer["type"]
            if kind == "conv2d":
                x = conv2d(x, decode_tensor(layer["kernel"]),
                           decode_tensor(layer["bias"]),
                           tuple(layer["strides"]), layer["padding"])
                x = _apply_activation(x, layer["activation"])
            elif kind == "maxpool2d":
                x = maxpool2d(x, tuple(layer["pool"]), tuple(layer["strides"]),
                              layer["padding"])
            elif kind == "global_avg_pool":
                x = x.mean(axis=(0, 1))
            elif kind == "dense":
                x = x @ decode_tensor(layer["kernel"]) + decode_tensor(layer["bias"])
                x = _apply_activation(x, layer["activation"])
            else:
                raise CorruptModelFile(f"unknown layer type {kind!r}")
        return np.asarray(x, dtype=np.float32).reshape(-1)

    def embed_waveform(self, samples: np.ndarray) -> np.ndarray:
        """One embedding row per one-second window of `samples` (already at
        the model's sample rate)."""
        wave = np.asarray(samples, dtype=np.float32)
        window = self.sample_rate
        n_windows = max(1, -(-wave.size // window))
        padded = np.zeros(n_windows * window, dtype=np.float32)
        padded[:wave.size] = wave
        rows = []
        for w in range(n_windows):
            feats = self._log_mel(padded[w * window:(w + 1) * window])
            try:
                rows.append(self._run_layers(feats))
            except CorruptModelFile:
                raise
            except Exception as exc:
                raise BackendFailure(f"{self.model_id}: inference failed: {exc}") from exc
        out = np.vstack(rows)
        if out.shape[1] != self.output_dim:
            raise DimensionMismatch(
                f"{self.model_id}: model produced dim {out.shape[1]}, "
                f"declared {self.output_dim}")
        return out


def load_model(path: str | Path) -> InterchangeModel:
    try:
        payload = json.loads(Path(path).read_text())
    except Exception as exc:
        raise CorruptModelFile(f"cannot parse interchange model {path}: {exc}") from exc
    if payload.get("format") != FORMAT:
        raise CorruptModelFile(f"{path}: not an {FORMAT} file")
    if payload.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: unsupported format_version {payload.get('format_version')!r}")
    try:
        frontend = payload["frontend"]
        return InterchangeModel(
            model_id=payload["id"],
            sample_rate=int(payload["sample_rate"]),
            output_dim=int(payload["output_dim"]),
            frontend=frontend,
            mel_matrix=decode_tensor(frontend["mel_matrix"]),
            layers=payload["layers"],
        )
    except (KeyError, ValueError) as exc:
        raise CorruptModelFile(f"{path}: malformed model: {exc}") from exc
