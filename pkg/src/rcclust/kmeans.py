"""K-means with k-means++ (D^2) seeding and Lloyd refinement."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .dataset import check_matrix
from .result import ClusteringResult


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    n_init: int = 10
    max_iters: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_init < 1 or self.max_iters < 1:
            raise ValueError("n_init and max_iters must be >= 1")


def _sq_dists(X, centers):
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kmeanspp_seed(X, k: int, rng: np.random.Generator) -> np.ndarray:
    """Pick k rows of X: the first uniformly, the rest with probability
    proportional to squared distance from the nearest chosen center."""
    X = check_matrix(X)
    n = X.shape[0]
    if k > n:
        raise ValueError(f"cannot seed {k} centers from {n} points")
    chosen = [int(rng.integers(n))]
    closest = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # fewer distinct rows than k
            idx = int(rng.integers(n))
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((X - X[idx]) ** 2, axis=1))
    return X[chosen].copy()


def _lloyd(X, centers, max_iters):
    """Returns (labels, centers, inertia, n_iter, inertia_history)."""
    labels = None
    history = []
    for it in range(1, max_iters + 1):
        d2 = _sq_dists(X, centers)
        new_labels = np.argmin(d2, axis=1)  # ties go to the lowest index
        history.append(float(d2[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = _update_centers(X, labels, centers, d2)
    d2 = _sq_dists(X, centers)
    inertia = float(d2[np.arange(len(X)), labels].sum())
    return labels, centers, inertia, it, history


def _update_centers(X, labels, centers, d2):
    k = centers.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros_like(centers)
    np.add.at(sums, labels, X)
    new = centers.copy()
    nonempty = counts > 0
    new[nonempty] = sums[nonempty] / counts[nonempty, None]
    if not nonempty.all():
        # move each empty center onto the point farthest from its own center
        own = d2[np.arange(len(X)), labels].copy()
        for j in np.flatnonzero(~nonempty):
            far = int(np.argmax(own))
            new[j] = X[far]
            own[far] = -1.0
    return new


def kmeans_fit(X, cfg: KmeansConfig) -> ClusteringResult:
    """Best-of-``n_init`` k-means++ runs, ranked by inertia.

    Restart r draws from ``default_rng(seed + r)``; equal inertias keep the
    earliest restart.
    """
    X = check_matrix(X)
    if cfg.k > X.shape[0]:
        raise ValueError(f"k={cfg.k} exceeds the number of samples {X.shape[0]}")
    best = None
    restarts = []
    for r in range(cfg.n_init):
        rng = np.random.default_rng(cfg.seed + r)
        centers = kmeanspp_seed(X, cfg.k, rng)
        labels, centers, inertia, n_iter, history = _lloyd(X, centers, cfg.max_iters)
        restarts.append({"restart": r, "seed": cfg.seed + r, "inertia": inertia, "n_iter": n_iter})
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, r, history)
    labels, centers, inertia, r, history = best
    meta = {
        "algorithm": "kmeanspp",
        "inertia": inertia,
        "centers": centers,
        "best_restart": r,
        "restarts": restarts,
        "inertia_history": history,
    }
    return ClusteringResult(labels, len(np.unique(labels)), meta)


def write_restart_report(result: ClusteringResult, path: str | os.PathLike) -> None:
    report = {
        "best_restart": result.metadata["best_restart"],
        "inertia": result.metadata["inertia"],
        "restarts": result.metadata["restarts"],
    }
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
