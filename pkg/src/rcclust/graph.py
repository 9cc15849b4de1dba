"""Mutual k-nearest-neighbour connectivity graph and pairwise edge weights."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .dataset import check_matrix

DEFAULT_K = 30
WEIGHTINGS = ("degree", "uniform")


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected edge list with ``p < q`` for every stored edge.

    ``edges`` is an (E, 2) integer array sorted lexicographically and
    ``weights`` holds one positive weight per edge (all ones until
    :func:`assign_edge_weights` is applied).
    """

    n_vertices: int
    edges: np.ndarray
    weights: np.ndarray
    k: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(weights) != len(edges):
            raise ValueError("one weight per edge is required")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must satisfy p < q (no self-loops)")
            if edges.min() < 0 or edges.max() >= self.n_vertices:
                raise ValueError("edge endpoint out of range")
            if len(np.unique(edges, axis=0)) != len(edges):
                raise ValueError("duplicate edges")
            if np.any(weights <= 0):
                raise ValueError("edge weights must be positive")
        for arr in (edges, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def edge_lengths(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=np.float64)
        return np.linalg.norm(U[self.edges[:, 0]] - U[self.edges[:, 1]], axis=1)

    def laplacian(self, edge_weights=None) -> sparse.csc_matrix:
        """Weighted graph Laplacian ``sum w_pq (e_p - e_q)(e_p - e_q)^T``."""
        w = self.weights if edge_weights is None else np.asarray(edge_weights, dtype=np.float64)
        n = self.n_vertices
        p, q = self.edges[:, 0], self.edges[:, 1]
        adj = sparse.coo_matrix((w, (p, q)), shape=(n, n))
        adj = (adj + adj.T).tocsc()
        deg = np.asarray(adj.sum(axis=1)).ravel()
        return (sparse.diags(deg) - adj).tocsc()


def _sorted_neighbors(X: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest neighbours of every row, ties to smaller index.

    Distances come from explicit differences rather than the Gram identity so
    that exactly tied distances stay tied.
    """
    n, d = X.shape
    block = max(1, int(4e6 // (n * d)))
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = X[start:stop, None, :] - X[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps equal distances in index order
        out[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def mutual_knn_graph(X, k: int = DEFAULT_K) -> NeighborGraph:
    """Keep edge (p, q) iff each endpoint is among the other's k nearest.

    Isolated vertices are allowed. Weights are initialised to one; call
    :func:`assign_edge_weights` before handing the graph to RCC.
    """
    X = check_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise ValueError("mutual kNN needs at least two points")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    nbrs = _sorted_neighbors(X, k)
    rows = np.repeat(np.arange(n), k)
    directed = sparse.coo_matrix((np.ones(n * k), (rows, nbrs.ravel())), shape=(n, n)).tocsr()
    mutual = directed.multiply(directed.T)
    mutual = sparse.triu(mutual, k=1).tocoo()
    order = np.lexsort((mutual.col, mutual.row))
    edges = np.column_stack([mutual.row[order], mutual.col[order]])
    return NeighborGraph(n, edges, np.ones(len(edges)), k=k, metadata={"k": k})


def assign_edge_weights(graph: NeighborGraph, scheme: str = "degree") -> NeighborGraph:
    """Return a copy of ``graph`` carrying pairwise-term weights.

    ``degree``: w_pq = N / (|E| sqrt(deg_p deg_q)), which evens out the total
    pull on each vertex. ``uniform``: w_pq = 1 / |E|.
    """
    if graph.n_edges == 0:
        raise ValueError("graph has no edges")
    n_edges = graph.n_edges
    if scheme == "degree":
        deg = graph.degrees.astype(np.float64)
        p, q = graph.edges[:, 0], graph.edges[:, 1]
        weights = graph.n_vertices / (n_edges * np.sqrt(deg[p] * deg[q]))
    elif scheme == "uniform":
        weights = np.full(n_edges, 1.0 / n_edges)
    else:
        raise ValueError(f"unknown weighting scheme {scheme!r}")
    meta = dict(graph.metadata, weighting=scheme)
    return NeighborGraph(graph.n_vertices, graph.edges, weights, k=graph.k, metadata=meta)


def write_edges_csv(graph: NeighborGraph, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["p", "q", "w"])
        for (p, q), w in zip(graph.edges, graph.weights):
            writer.writerow([int(p), int(q), repr(float(w))])
