"""Exact t-SNE (O(N^2)) for projecting prepared feature vectors to 2-D.

Development-set sizes here are small enough (~1k points) that the exact
gradient is affordable and keeps approximation error out of the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateDistances
from .rng import child_generator

P_FLOOR = 1e-12
ENTROPY_TOL_BITS = 1e-5
MAX_BISECT_STEPS = 64


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    exaggeration_factor: float = 12.0
    exaggeration_duration: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    output_dim: int = 2
    seed: int = 42

    def __post_init__(self) -> None:
        if self.perplexity <= 1:
            raise ValueError("perplexity must be > 1")
        if self.iterations < self.exaggeration_duration:
            raise ValueError("iterations must cover the exaggeration phase")


@dataclass
class Projection:
    coords: np.ndarray                 # N x 2
    kl_history: list[float]            # KL(P||Q) in nats after each iteration
    ids: list[str]
    labels: np.ndarray | None = None


def pairwise_sq_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_affinities(d2_row: np.ndarray, beta: float, i: int) -> tuple[np.ndarray, float]:
    """Conditional distribution for one point at precision beta, and its
    Shannon entropy in bits."""
    p = np.exp(-d2_row * beta)
    p[i] = 0.0
    total = p.sum()
    if total <= 0.0:
        return p, 0.0
    p /= total
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    return p, entropy


def conditional_affinities(distances_sq: np.ndarray, perplexity: float,
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Per-row binary search on precision so each conditional distribution's
    perplexity matches the target. Returns (conditional P, betas)."""
    n = distances_sq.shape[0]
    if distances_sq.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if perplexity >= n:
        raise ValueError("perplexity must be < N")
    target = float(np.log2(perplexity))
    P = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        row = distances_sq[i]
        if np.all(row[np.arange(n) != i] == 0.0):
            raise DegenerateDistances(f"point {i} is at distance zero from all others")
        beta, lo, hi = 1.0, 0.0, np.inf
        p, entropy = _row_affinities(row, beta, i)
        for _ in range(MAX_BISECT_STEPS):
            diff = entropy - target
            if abs(diff) <= ENTROPY_TOL_BITS:
                break
            if diff > 0:        # distribution too flat -> sharpen
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
            p, entropy = _row_affinities(row, beta, i)
        P[i] = p
        betas[i] = beta
    return P, betas


def perplexity_calibrate(distances_sq: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized affinities p_ij = (p_j|i + p_i|j) / 2N, floored for log
    stability and renormalized so the matrix sums to exactly 1."""
    cond, _ = conditional_affinities(distances_sq, perplexity)
    n = cond.shape[0]
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, P_FLOOR)
    np.fill_diagonal(P, 0.0)
    return P / P.sum()


def _kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne(features: np.ndarray, cfg: TsneConfig | None = None,
         ids: Sequence[str] | None = None,
         labels: np.ndarray | None = None) -> Projection:
    cfg = cfg or TsneConfig()
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    if n < 10:
        raise ValueError("need at least 10 points")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if not cfg.perplexity < n / 3:
        raise ValueError(f"perplexity {cfg.perplexity} too large for N={n} (need < N/3)")
    if cfg.output_dim != 2:
        raise ValueError("only 2-D output is supported")
    if ids is None:
        ids = [str(i) for i in range(n)]

    P = perplexity_calibrate(pairwise_sq_distances(X), cfg.perplexity)

    rng = child_generator(cfg.seed, "tsne")
    Y = rng.standard_normal((n, cfg.output_dim)) * 1e-4
    velocity = np.zeros_like(Y)
    kl_history: list[float] = []

    for iteration in range(1, cfg.iterations + 1):
        P_eff = P * cfg.exaggeration_factor if iteration <= cfg.exaggeration_duration else P
        d2 = pairwise_sq_distances(Y)
        weights = 1.0 / (1.0 + d2)          # Student-t kernel, one degree of freedom
        np.fill_diagonal(weights, 0.0)
        Q = np.maximum(weights / weights.sum(), P_FLOOR)

        M = (P_eff - Q) * weights
        grad = 4.0 * (M.sum(axis=1)[:, None] * Y - M @ Y)

        momentum = (cfg.momentum_start if iteration <= cfg.momentum_switch_iter
                    else cfg.momentum_final)
        velocity = momentum * velocity - cfg.learning_rate * grad
        Y = Y + velocity
        Y -= Y.mean(axis=0)                 # keep the embedding centered

        kl_history.append(_kl_divergence(P, Q))  # true KL, not the exaggerated one

    return Projection(coords=Y, kl_history=kl_history, ids=list(ids), labels=labels)


def export_scatter(proj: Projection, path: str | Path) -> None:
    """CSV ``id,x,y,label``; label column is empty for unlabeled data.
    Coordinates carry 9 significant digits (round-trip safe)."""
    lines = ["id,x,y,label"]
    for i, fid in enumerate(proj.ids):
        label = "" if proj.labels is None else str(int(proj.labels[i]))
        x, y = proj.coords[i]
        lines.append(f"{fid},{x:.9g},{y:.9g},{label}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_kl_history_csv(proj: Projection, path: str | Path) -> None:
    lines = ["iter,kl"]
    for i, kl in enumerate(proj.kl_history, start=1):
        lines.append(f"{i},{kl!r}")
    Path(path).write_text("\n".join(lines) + "\n")
