"""Robust Continuous Clustering.

Every sample x_i owns a representative u_i, initialised at x_i. The
representatives are pulled together along the edges of a mutual-kNN graph
under a Geman-McClure penalty. The penalty is optimised in its lifted form
with one line-process variable l_pq in (0, 1] per edge, alternating between
the closed-form optimum for l and a sparse linear solve for U, while the
penalty scale mu is annealed downwards (graduated non-convexity). Clusters
are the connected components of the edges whose representatives ended up
closer than a cut threshold.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from .dataset import check_matrix
from .graph import NeighborGraph
from .result import ClusteringResult, relabel_by_first_occurrence

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Linear solve failed to reach the requested residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (achieved relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class RccConfig:
    max_iters: int = 100
    inner_iters_per_mu: int = 4
    linear_solver_tolerance: float = 1e-6
    cluster_cut_factor: float = 1.0
    convergence_tol: float = 1e-7

    def __post_init__(self):
        if self.max_iters < 1 or self.inner_iters_per_mu < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.linear_solver_tolerance <= 0 or self.cluster_cut_factor <= 0:
            raise ValueError("tolerances and cut factor must be positive")


@dataclass
class RccState:
    """Optimisation state; ``objective_trace`` holds (iteration, mu, value).

    Two trace entries are recorded per iteration: one after the line-process
    update and one after the representative update.
    """

    U: np.ndarray
    l: np.ndarray
    mu: float
    lam: float
    delta: float
    objective_trace: list = field(default_factory=list)
    mu_trace: list = field(default_factory=list)
    n_iters: int = 0
    converged: bool = False


def geman_mcclure(y, mu):
    y2 = np.square(y)
    return mu * y2 / (mu + y2)


def line_penalty(l, mu):
    return mu * np.square(np.sqrt(l) - 1.0)


def optimal_line_process(dist, mu):
    """Closed-form minimiser over l of ``l * dist**2 + mu * (sqrt(l) - 1)**2``."""
    return np.square(mu / (mu + np.square(dist)))


def lifted_objective(X, U, graph: NeighborGraph, l, mu: float, lam: float) -> float:
    X = np.asarray(X, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    if X.shape != U.shape:
        raise ValueError(f"X and U shapes differ: {X.shape} vs {U.shape}")
    if X.shape[0] != graph.n_vertices or l.shape != (graph.n_edges,):
        raise ValueError("graph, line process and data sizes are inconsistent")
    data = 0.5 * np.sum(np.square(X - U))
    if graph.n_edges == 0:
        return float(data)
    sq = np.square(graph.edge_lengths(U))
    pair = np.sum(graph.weights * (l * sq + line_penalty(l, mu)))
    return float(data + 0.5 * lam * pair)


def update_representatives(X, graph: NeighborGraph, l, lam: float,
                           tol: float = 1e-6, max_refinements: int = 3) -> np.ndarray:
    """Solve ``(I + lam * A) U = X`` where A is the Laplacian of ``w * l``.

    Uses a sparse LU factorisation followed by iterative refinement if the
    relative residual is still above ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    if lam == 0 or graph.n_edges == 0:
        return X.copy()
    M = (sparse.identity(graph.n_vertices, format="csc")
         + lam * graph.laplacian(graph.weights * np.asarray(l))).tocsc()
    lu = splu(M)
    U = lu.solve(X)
    x_norm = np.linalg.norm(X)
    if x_norm == 0:
        return U
    for _ in range(max_refinements + 1):
        resid = X - M @ U
        rel = np.linalg.norm(resid) / x_norm
        if rel <= tol:
            return U
        U = U + lu.solve(resid)
    raise ConvergenceError("representative update did not converge", rel)


def _spectral_norm(apply, dim: int, n_iter: int = 50) -> float:
    """Largest eigenvalue of a PSD operator by power iteration."""
    v = np.random.default_rng(0).standard_normal(dim)
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(n_iter):
        w = apply(v)
        value = np.linalg.norm(w)
        if value == 0:
            return 0.0
        v = w / value
    return float(value)


def balance_weight(X, graph: NeighborGraph) -> float:
    """lambda = ||X||_2 / ||A||_2 for the initial (l = 1) weighted Laplacian."""
    x_norm = np.sqrt(_spectral_norm(lambda v: X.T @ (X @ v), X.shape[1]))
    A = graph.laplacian()
    a_norm = _spectral_norm(lambda v: A @ v, graph.n_vertices)
    if a_norm == 0 or x_norm == 0:
        return 1.0
    return x_norm / a_norm


def cut_threshold(X, graph: NeighborGraph, factor: float = 1.0) -> float:
    """Mean distance from each connected vertex to its nearest mutual neighbour."""
    lengths = graph.edge_lengths(X)
    nearest = np.full(graph.n_vertices, np.inf)
    np.minimum.at(nearest, graph.edges[:, 0], lengths)
    np.minimum.at(nearest, graph.edges[:, 1], lengths)
    nearest = nearest[np.isfinite(nearest)]
    return float(factor * nearest.mean())


def extract_clusters(U, graph: NeighborGraph, delta: float) -> ClusteringResult:
    """Connected components of the graph edges shorter than ``delta``.

    Components are numbered in order of their smallest vertex index.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = graph.n_vertices
    if graph.n_edges:
        keep = graph.edge_lengths(U) < delta
        p, q = graph.edges[keep, 0], graph.edges[keep, 1]
    else:
        p = q = np.empty(0, dtype=np.int64)
    adj = sparse.coo_matrix((np.ones(len(p)), (p, q)), shape=(n, n))
    _, comp = csgraph.connected_components(adj, directed=False)
    labels = relabel_by_first_occurrence(comp)
    return ClusteringResult(labels, int(labels.max()) + 1, {"delta": delta})


def rcc_fit(X, graph: NeighborGraph, cfg: RccConfig | None = None
            ) -> tuple[RccState, ClusteringResult]:
    """Run RCC on ``X`` (ideally normalised) over a weighted mutual-kNN graph.

    Parameters
    ----------
    X : array-like, shape (N, D)
    graph : NeighborGraph
        Graph on the N rows of ``X`` carrying edge weights.
    cfg : RccConfig, optional

    Returns
    -------
    state : RccState
    result : ClusteringResult
    """
    cfg = cfg or RccConfig()
    X = check_matrix(X)
    n = X.shape[0]
    if graph.n_vertices != n:
        raise ValueError(f"graph has {graph.n_vertices} vertices but X has {n} rows")

    if graph.n_edges == 0:
        logger.warning("graph has no edges; every sample is its own cluster")
        state = RccState(U=X.copy(), l=np.ones(0), mu=0.0, lam=0.0, delta=0.0)
        result = ClusteringResult(np.arange(n), n, {"algorithm": "rcc", "n_iters": 0})
        return state, result

    max_length = float(np.max(graph.edge_lengths(X)))
    if max_length == 0:
        # every edge joins coincident points: nothing to optimise
        state = RccState(U=X.copy(), l=np.ones(graph.n_edges), mu=0.0, lam=0.0, delta=0.0)
        result = extract_clusters(X, graph, np.finfo(float).eps)
        meta = {"algorithm": "rcc", "n_iters": 0, "converged": True}
        return state, ClusteringResult(result.labels, result.n_clusters, meta)
    delta = cut_threshold(X, graph, cfg.cluster_cut_factor)
    if delta == 0:
        delta = np.finfo(float).eps * max_length
    mu0 = 3.0 * max_length ** 2
    mu_floor = min(delta ** 2 / 2.0, mu0)
    lam = balance_weight(X, graph)
    logger.info("rcc: N=%d edges=%d lambda=%.4g mu0=%.4g mu_floor=%.4g delta=%.4g",
                n, graph.n_edges, lam, mu0, mu_floor, delta)

    state = RccState(U=X.copy(), l=np.ones(graph.n_edges), mu=mu0, lam=lam, delta=delta)
    previous = None
    for it in range(cfg.max_iters):
        mu = max(mu0 * 0.5 ** (it // cfg.inner_iters_per_mu), mu_floor)
        state.mu = mu
        state.mu_trace.append(mu)

        state.l = optimal_line_process(graph.edge_lengths(state.U), mu)
        state.objective_trace.append(
            (it, mu, lifted_objective(X, state.U, graph, state.l, mu, lam)))

        state.U = update_representatives(X, graph, state.l, lam, cfg.linear_solver_tolerance)
        value = lifted_objective(X, state.U, graph, state.l, mu, lam)
        state.objective_trace.append((it, mu, value))
        state.n_iters = it + 1

        if mu == mu_floor and previous is not None and previous[0] == mu:
            change = abs(previous[1] - value) / max(abs(previous[1]), np.finfo(float).tiny)
            if change < cfg.convergence_tol:
                state.converged = True
                break
        previous = (mu, value)

    result = extract_clusters(state.U, graph, delta)
    meta = {
        "algorithm": "rcc",
        "n_iters": state.n_iters,
        "converged": state.converged,
        "lambda": lam,
        "mu_final": state.mu,
        "delta": delta,
    }
    result = ClusteringResult(result.labels, result.n_clusters, meta)
    logger.info("rcc: %d clusters after %d iterations", result.n_clusters, state.n_iters)
    return state, result


def write_trace_csv(state: RccState, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "mu", "objective"])
        for it, mu, value in state.objective_trace:
            writer.writerow([it, repr(float(mu)), repr(float(value))])
