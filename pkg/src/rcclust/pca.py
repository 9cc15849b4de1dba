"""Principal component analysis through the thin SVD of centered data."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .dataset import check_matrix, read_matrix_csv, write_matrix_csv


@dataclass(frozen=True)
class PcaModel:
    """Fitted projection.

    Attributes
    ----------
    mean : ndarray, shape (D,)
    components : ndarray, shape (k, D)
        Orthonormal rows, each with its largest-magnitude entry positive.
    explained_variance : ndarray, shape (k,)
        Non-increasing sample variances (divisor N - 1) along each component.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(X, k: int) -> PcaModel:
    X = check_matrix(X)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least two samples")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k must lie in [1, {min(n, d)}], got {k}")

    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:k].copy()
    # SVD signs are arbitrary; pin them so fits are reproducible.
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    components *= signs[:, None]
    explained = s[:k] ** 2 / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = check_matrix(X)
    if X.shape[1] != model.mean.shape[0]:
        raise ValueError(
            f"dimension mismatch: model expects {model.mean.shape[0]} columns, got {X.shape[1]}"
        )
    return (X - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    return Z @ model.components + model.mean


def save_pca(model: PcaModel, path: str | os.PathLike) -> None:
    """Write the model as CSV: mean row, component rows, then variance row.

    The variance row holds k values padded with zeros to D columns.
    """
    d = model.mean.shape[0]
    variance_row = np.zeros(d)
    variance_row[: model.n_components] = model.explained_variance
    table = np.vstack([model.mean, model.components, variance_row])
    write_matrix_csv(table, path)


def load_pca(path: str | os.PathLike) -> PcaModel:
    table = read_matrix_csv(path)
    if table.shape[0] < 3:
        raise ValueError(f"{path}: a PCA file needs at least 3 rows")
    k = table.shape[0] - 2
    return PcaModel(
        mean=table[0],
        components=table[1:-1],
        explained_variance=table[-1, :k].copy(),
    )
