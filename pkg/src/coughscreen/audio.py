"""Audio decode, resample, and embedding pooling.

decode -> resample -> embed -> pool is deterministic end to end: identical
bytes in, identical vectors out.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyAudio, EmptyMatrix, UnreadableFile
from .flac import decode_flac

RESAMPLE_TAPS = 32


@dataclass(frozen=True)
class AudioClip:
    """Mono audio with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    file_id: str | None = None

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise EmptyAudio("clip has no samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("clip samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _normalize_int_pcm(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    info = np.iinfo(data.dtype)
    return data.astype(np.float64) / (info.max + 1)


def decode_audio(path: str | Path) -> AudioClip:
    """Decode a FLAC or WAV file to a mono clip; multi-channel input is
    averaged per sample, the container's sample rate is preserved."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc

    if raw[:4] == b"fLaC":
        stream = decode_flac(raw)
        if stream.samples.shape[0] == 0:
            raise EmptyAudio(f"{path}: zero samples")
        scale = float(1 << (stream.bits_per_sample - 1))
        mono = stream.samples.mean(axis=1) / scale
        rate = stream.sample_rate
    elif raw[:4] == b"RIFF":
        from scipy.io import wavfile

        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rate, data = wavfile.read(path)
        except Exception as exc:
            raise UnreadableFile(f"{path}: {exc}") from exc
        if data.size == 0:
            raise EmptyAudio(f"{path}: zero samples")
        if np.issubdtype(data.dtype, np.integer):
            data = _normalize_int_pcm(data)
        else:
            data = data.astype(np.float64)
        mono = data.mean(axis=1) if data.ndim == 2 else data
    else:
        raise UnreadableFile(f"{path}: unsupported container (not FLAC or WAV)")

    mono = np.clip(mono, -1.0, 1.0)
    return AudioClip(samples=mono, sample_rate=int(rate), file_id=path.stem)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited resampling with a 32-tap Hann-windowed sinc kernel."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return clip

    x = clip.samples
    n_out = int(round(x.size * target_rate / clip.sample_rate))
    step = clip.sample_rate / target_rate
    cutoff = min(1.0, 1.0 / step)           # relative to the input Nyquist
    half = RESAMPLE_TAPS // 2

    positions = np.arange(n_out) * step
    base = np.floor(positions).astype(np.int64)
    tap_index = base[:, None] + np.arange(-half + 1, half + 1)[None, :]
    offsets = tap_index - positions[:, None]

    kernel = cutoff * np.sinc(cutoff * offsets)
    kernel *= 0.5 * (1.0 + np.cos(np.pi * offsets / half))   # Hann taper
    kernel /= kernel.sum(axis=1, keepdims=True)              # unity DC gain

    padded = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])
    out = np.sum(padded[tap_index + half] * kernel, axis=1)
    out = np.clip(out, -1.0, 1.0)
    return AudioClip(samples=out, sample_rate=target_rate, file_id=clip.file_id)


def pad_to_duration(clip: AudioClip, min_seconds: float = 1.0) -> AudioClip:
    """Symmetric zero padding for clips shorter than the backend window."""
    required = int(np.ceil(min_seconds * clip.sample_rate))
    missing = required - clip.samples.size
    if missing <= 0:
        return clip
    before = missing // 2
    padded = np.concatenate([
        np.zeros(before), clip.samples, np.zeros(missing - before)])
    return replace(clip, samples=padded)


@dataclass(frozen=True)
class FeatureVector:
    """Pooled fixed-length descriptor of one recording."""

    values: np.ndarray
    file_id: str | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise ValueError("feature vector must be 1-D and finite")
        object.__setattr__(self, "values", values)


def pool_and_concat(matrices: list[np.ndarray],
                    file_id: str | None = None) -> FeatureVector:
    """Column-wise mean per matrix, concatenated in the given backend order."""
    if not matrices:
        raise EmptyMatrix("no embedding matrices to pool")
    pooled = []
    for mat in matrices:
        arr = np.asarray(mat, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise EmptyMatrix("embedding matrix must have at least one row")
        pooled.append(arr.mean(axis=0))
    return FeatureVector(values=np.concatenate(pooled), file_id=file_id)
