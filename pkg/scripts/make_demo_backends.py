#!/usr/bin/env python3
"""Create a pair of small interchange embedding models plus demo WAV clips,
so the `extract` subcommand can be exercised without the real pretrained
networks. The generated backends follow the built-in dimension convention
(6144-dim first, then 1024-dim) at reduced sample rates.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from coughscreen.interchange import encode_tensor


def _mel_matrix(n_bins: int, n_mels: int) -> np.ndarray:
    centers = np.linspace(0, n_bins - 1, n_mels + 2)
    bank = np.zeros((n_bins, n_mels), dtype=np.float32)
    for m in range(n_mels):
        lo, mid, hi = centers[m], centers[m + 1], centers[m + 2]
        bins = np.arange(n_bins)
        bank[:, m] = np.clip(np.minimum((bins - lo) / max(mid - lo, 1e-6),
                                        (hi - bins) / max(hi - mid, 1e-6)),
                             0.0, None)
    return bank


def make_model(model_id: str, output_dim: int, sample_rate: int,
               seed: int) -> dict:
    rng = np.random.default_rng(seed)
    n_mels, channels = 32, 8
    fft_length = 512
    n_bins = fft_length // 2 + 1
    return {
        "format": "AEM1",
        "format_version": 1,
        "id": model_id,
        "sample_rate": sample_rate,
        "output_dim": output_dim,
        "frontend": {
            "type": "log_mel",
            "frame_length": 400,
            "hop_length": 160,
            "fft_length": fft_length,
            "log_offset": 0.001,
            "window": "hann",
            "mel_matrix": encode_tensor(_mel_matrix(n_bins, n_mels)),
        },
        "layers": [
            {"type": "conv2d", "strides": [2, 2], "padding": "same",
             "activation": "relu",
             "kernel": encode_tensor(rng.normal(0, 0.2, (3, 3, 1, channels))),
             "bias": encode_tensor(rng.normal(0, 0.05, channels))},
            {"type": "maxpool2d", "pool": [2, 2], "strides": [2, 2],
             "padding": "valid"},
            {"type": "global_avg_pool"},
            {"type": "dense", "activation": "linear",
             "kernel": encode_tensor(rng.normal(0, 0.2, (channels, output_dim))),
             "bias": encode_tensor(rng.normal(0, 0.05, output_dim))},
        ],
    }


def write_wav(path: Path, rng: np.random.Generator, seconds: float,
              rate: int = 44100) -> None:
    from scipy.io import wavfile

    t = np.arange(int(seconds * rate)) / rate
    burst = np.exp(-((t - seconds / 2) ** 2) / 0.01)
    wave = 0.3 * burst * rng.normal(0, 1, t.size) + 0.05 * np.sin(2 * np.pi * 180 * t)
    wavfile.write(path, rate, (np.clip(wave, -1, 1) * 32767).astype(np.int16))


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/demo_backends")
    parser.add_argument("--clips", type=int, default=5)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "wide.aem1.json").write_text(
        json.dumps(make_model("demo-wide", 6144, 16000, args.seed)))
    (out / "narrow.aem1.json").write_text(
        json.dumps(make_model("demo-narrow", 1024, 8000, args.seed + 1)))
    (out / "backends.json").write_text(json.dumps([
        {"id": "demo-wide", "output_dim": 6144, "sample_rate": 16000,
         "model_path": "wide.aem1.json"},
        {"id": "demo-narrow", "output_dim": 1024, "sample_rate": 8000,
         "model_path": "narrow.aem1.json"},
    ], indent=2) + "\n")

    audio = out / "audio"
    audio.mkdir(exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for i in range(args.clips):
        write_wav(audio / f"demo{i:02d}.wav", rng, seconds=1.0 + 0.5 * i)
    print(f"wrote backends + {args.clips} clips under {out}")
    print(f"try: coughscreen extract --audio-dir {audio} "
          f"--backends {out / 'backends.json'} --out {out / 'features'}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
