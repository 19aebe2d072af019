"""Exact (O(N^2)) t-SNE over pooled utterance representations.

Per-point Gaussian bandwidths are binary-searched to hit the target
perplexity; the low-dimensional map uses the Student-t kernel with
gradient descent, momentum switching, and early exaggeration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NlskitError

log = logging.getLogger(__name__)

_PERPLEXITY_TOL = 1e-3
_MAX_BISECTIONS = 64
_P_MIN = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    perplexity: Optional[float] = None  # default min(30, (N-1)/3)
    iterations: int = 500
    learning_rate: float = 100.0
    early_exaggeration: float = 4.0
    exaggeration_iters: int = 100
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    output_dim: int = 2
    seed: int = 0


def _pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points**2, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _row_entropy_probs(dists_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Shannon entropy (nats) and conditional probabilities for one row."""
    p = np.exp(-dists_row * beta)
    total = p.sum()
    if total <= 0.0:
        p = np.full_like(p, 1.0 / len(p))
        total = 1.0
    else:
        p = p / total
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(p > 0, p * np.log(p), 0.0))
    return h, p


def conditional_affinities(
    points: np.ndarray, perplexity: float
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise conditional probabilities whose perplexity matches the
    target within 1e-3, found by bisection on the Gaussian precision."""
    n = len(points)
    if perplexity >= n:
        raise NlskitError(f"perplexity {perplexity} must be < N = {n}")
    target_h = np.log(perplexity)
    dists = _pairwise_sq_dists(points)
    p_cond = np.zeros((n, n))
    betas = np.ones(n)
    idx = np.arange(n)
    for i in range(n):
        row = dists[i, idx != i]
        beta, lo, hi = 1.0, 0.0, np.inf
        h, p = _row_entropy_probs(row, beta)
        for _ in range(_MAX_BISECTIONS):
            if abs(h - target_h) < _PERPLEXITY_TOL:
                break
            if h > target_h:
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (lo + beta) / 2.0
            h, p = _row_entropy_probs(row, beta)
        else:
            log.warning(
                "perplexity bisection did not converge for row %d (H=%.6f)", i, h
            )
        betas[i] = beta
        p_cond[i, idx != i] = p
    return p_cond, betas


def joint_affinities(points: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized affinities: non-negative, symmetric, summing to 1."""
    p_cond, _ = conditional_affinities(points, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * len(points))
    return np.maximum(p, _P_MIN)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


def tsne(points: np.ndarray, config: TsneConfig = TsneConfig()) -> np.ndarray:
    """Project N x D points to N x output_dim coordinates.

    Deterministic given config.seed; output is mean-centered every
    iteration; the KL objective is checked finite every 50 iterations.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 4:
        raise NlskitError("need at least 4 points")
    if not np.all(np.isfinite(points)):
        raise NlskitError("input points must be finite")
    perplexity = config.perplexity
    if perplexity is None:
        perplexity = min(30.0, (n - 1) / 3.0)
    if perplexity >= n:
        raise NlskitError(f"perplexity {perplexity} must be < N = {n}")

    p = joint_affinities(points, perplexity)

    rng = np.random.default_rng(config.seed & 0xFFFFFFFFFFFFFFFF)
    y = rng.normal(0.0, 1e-2, size=(n, config.output_dim))
    y -= y.mean(axis=0)
    velocity = np.zeros_like(y)

    for it in range(1, config.iterations + 1):
        exaggeration = config.early_exaggeration if it <= config.exaggeration_iters else 1.0
        momentum = (
            config.momentum_start
            if it <= config.momentum_switch_iter
            else config.momentum_final
        )
        d = _pairwise_sq_dists(y)
        inv = 1.0 / (1.0 + d)
        np.fill_diagonal(inv, 0.0)
        q = np.maximum(inv / inv.sum(), _P_MIN)

        # dC/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1
        pq = (exaggeration * p - q) * inv
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)

        velocity = momentum * velocity - config.learning_rate * grad
        y = y + velocity
        y -= y.mean(axis=0)

        if it % 50 == 0:
            kl = kl_divergence(p, q)
            if not np.isfinite(kl):
                raise NlskitError(f"KL objective diverged at iteration {it}")

    return y
