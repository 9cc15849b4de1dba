"""Exact t-SNE.

Gaussian conditional affinities are calibrated per point to a target
perplexity, symmetrised into a joint distribution P, and a 2-D embedding is
found by gradient descent on KL(P || Q) where Q uses a Student-t kernel.
All pairwise quantities are dense, so memory grows as N^2.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import check_matrix, write_matrix_csv

logger = logging.getLogger(__name__)

AFFINITY_FLOOR = 1e-12
MIN_GAIN = 0.01


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    n_iters: int = 1000
    learning_rate: float = 200.0
    exaggeration: float = 4.0
    exaggeration_iters: int = 100
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    seed: int = 0
    init_scale: float = 1e-4

    def __post_init__(self):
        if self.perplexity <= 0 or self.learning_rate <= 0 or self.init_scale <= 0:
            raise ValueError("perplexity, learning_rate and init_scale must be positive")
        if self.n_iters < 1 or self.exaggeration <= 0:
            raise ValueError("n_iters and exaggeration must be positive")


@dataclass
class TsneResult:
    Y: np.ndarray
    kl: float
    kl_trace: list = field(default_factory=list)


def _row_entropy(d, beta):
    """Conditional row and its entropy in nats for precision ``beta``.

    ``d`` must already be shifted so that its minimum is zero.
    """
    w = np.exp(-beta * d)
    s = w.sum()
    p = w / s
    return p, math.log(s) + beta * float(np.dot(d, p))


def perplexity_search(sq_dists, target_perplexity: float, tol: float = 1e-5,
                      max_iter: int = 50) -> tuple[float, np.ndarray]:
    """Find the Gaussian bandwidth whose conditional row has the target perplexity.

    The search bisects on log(beta), beta = 1 / (2 sigma^2), until the
    achieved log2-perplexity is within ``tol`` of the target.

    Parameters
    ----------
    sq_dists : array-like, shape (M,)
        Squared distances from point i to the M other points.
    target_perplexity : float
        Must be below M + 1.

    Returns
    -------
    sigma : float
        ``inf`` when the row is uniform for every bandwidth.
    p : ndarray, shape (M,)
        Conditional probabilities p_{j|i}, summing to one.
    """
    d = np.asarray(sq_dists, dtype=np.float64)
    m = d.size
    if m < 2:
        raise ValueError("perplexity search needs at least two neighbours")
    if not 0 < target_perplexity < m + 1:
        raise ValueError(f"target perplexity must lie in (0, {m + 1}), got {target_perplexity}")
    d = d - d.min()
    if d.max() == 0 or target_perplexity >= m:
        # uniform is the only solution, or the beta -> 0 limit
        if np.all(np.asarray(sq_dists) == 0):
            logger.warning("all distances are zero; using a uniform conditional row")
        return math.inf, np.full(m, 1.0 / m)

    target = math.log(target_perplexity)  # nats
    tol_nats = tol * math.log(2)
    log_beta = -math.log(np.mean(d[d > 0]))
    lo, hi, step = -math.inf, math.inf, 1.0
    for _ in range(max_iter):
        p, h = _row_entropy(d, math.exp(log_beta))
        diff = h - target
        if abs(diff) < tol_nats:
            break
        if diff > 0:  # too flat: sharpen
            lo = log_beta
            if hi == math.inf:
                log_beta += step
                step *= 2
            else:
                log_beta = 0.5 * (lo + hi)
        else:
            hi = log_beta
            if lo == -math.inf:
                log_beta -= step
                step *= 2
            else:
                log_beta = 0.5 * (lo + hi)
    else:
        p, h = _row_entropy(d, math.exp(log_beta))
    beta = math.exp(log_beta)
    return math.sqrt(1.0 / (2.0 * beta)), p


def squared_distances(X) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def conditional_affinities(X, perplexity: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic matrix of p_{j|i} and the per-point bandwidths."""
    X = check_matrix(X)
    n = X.shape[0]
    d2 = squared_distances(X)
    cond = np.zeros((n, n))
    sigmas = np.empty(n)
    others = ~np.eye(n, dtype=bool)
    for i in range(n):
        sigmas[i], cond[i, others[i]] = perplexity_search(d2[i, others[i]], perplexity)
    return cond, sigmas


def build_affinities(X, perplexity: float) -> np.ndarray:
    """Joint affinities p_ij = (p_{j|i} + p_{i|j}) / 2N with a 1e-12 floor."""
    X = check_matrix(X)
    n = X.shape[0]
    if n < 3:
        raise ValueError("t-SNE needs at least three points")
    cond, _ = conditional_affinities(X, perplexity)
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, AFFINITY_FLOOR)
    np.fill_diagonal(P, 0.0)
    P /= P.sum()
    return P


def kl_divergence(P, Q) -> float:
    """KL(P || Q) in nats, treating 0 log 0 as 0 and ignoring the diagonal."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch {P.shape} vs {Q.shape}")
    mask = P > 0
    if P.ndim == 2 and P.shape[0] == P.shape[1]:
        mask &= ~np.eye(P.shape[0], dtype=bool)
    if np.any(Q[mask] <= 0):
        raise ValueError("Q is zero where P is positive")
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def student_t_affinities(Y) -> tuple[np.ndarray, np.ndarray]:
    """Return (Q, kernel) where kernel_ij = 1 / (1 + |y_i - y_j|^2), zero diagonal."""
    kernel = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(kernel, 0.0)
    return kernel / kernel.sum(), kernel


def kl_gradient(P, Y) -> tuple[np.ndarray, np.ndarray]:
    """Gradient 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2); also returns Q."""
    Q, kernel = student_t_affinities(Y)
    W = (P - Q) * kernel
    grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)
    return grad, Q


def tsne_embed(X, cfg: TsneConfig | None = None, P=None) -> TsneResult:
    """Embed the rows of ``X`` in 2-D.

    Momentum gradient descent with per-coordinate adaptive gains and early
    exaggeration of P.
    ``P`` may be passed to reuse precomputed affinities. ``kl_trace`` holds
    KL(P || Q) for the un-exaggerated P at the start of every iteration.
    """
    cfg = cfg or TsneConfig()
    X = check_matrix(X)
    n = X.shape[0]
    if n < 3:
        raise ValueError("t-SNE needs at least three points")
    if cfg.perplexity >= n:
        raise ValueError(f"perplexity {cfg.perplexity} must be below N={n}")
    if P is None:
        P = build_affinities(X, cfg.perplexity)

    rng = np.random.default_rng(cfg.seed)
    Y = rng.standard_normal((n, 2)) * cfg.init_scale
    Y -= Y.mean(axis=0)
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace = []
    for it in range(cfg.n_iters):
        scale = cfg.exaggeration if it < cfg.exaggeration_iters else 1.0
        grad, Q = kl_gradient(P * scale, Y)
        trace.append(kl_divergence(P, Q))
        momentum = cfg.momentum_initial if it < cfg.momentum_switch_iter else cfg.momentum_final
        # per-coordinate gains: grow while still moving downhill, shrink on overshoot
        flip = np.sign(grad) != np.sign(velocity)
        gains = np.maximum(np.where(flip, gains + 0.2, gains * 0.8), MIN_GAIN)
        velocity = momentum * velocity - cfg.learning_rate * gains * grad
        Y = Y + velocity
        Y -= Y.mean(axis=0)
    Q, _ = student_t_affinities(Y)
    kl = kl_divergence(P, Q)
    logger.info("t-SNE finished: KL=%.5f after %d iterations", kl, cfg.n_iters)
    return TsneResult(Y=Y, kl=kl, kl_trace=trace)


def write_embedding_csv(Y, path: str | os.PathLike) -> None:
    write_matrix_csv(Y, path, header=["x", "y"])
