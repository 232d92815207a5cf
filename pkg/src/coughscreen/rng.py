"""Labeled RNG streams derived from one master seed.

Every stage of the pipeline draws from its own named child stream, so adding
or reordering stages never perturbs the randomness seen by another stage.
Labels in use: "synth", "fold-<k>", "search", "tsne", "genome-<key>".
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    # sha256 rather than hash(): stable across processes and platforms
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def child_seed(master_seed: int, label: str) -> int:
    """64-bit seed for the named child stream."""
    ss = np.random.SeedSequence(entropy=(int(master_seed), _label_entropy(label)))
    return int(ss.generate_state(1, np.uint64)[0])


def child_generator(master_seed: int, label: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=(int(master_seed), _label_entropy(label)))
    return np.random.Generator(np.random.PCG64(ss))
