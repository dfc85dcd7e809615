"""Inference: project every detection (eval mode), pool its views into one
unit vector, and k-means-cluster into the known number of identities.

The k-means++ seeding draws from a canonical ordering of the points (rows
sorted lexicographically by value), so permuting the input point order
cannot change the resulting partition under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateFeatureError, InvariantError
from .head import ProjectionHead
from .store import EmbeddingDataset

MAX_LLOYD_ITERATIONS = 300
DEFAULT_RESTARTS = 10


@dataclass
class ClusterResult:
    assignments: np.ndarray  # (M,) cluster index per point
    centers: np.ndarray  # (k, dim)
    inertia: float  # sum of squared distances to assigned centers
    iterations: int  # Lloyd iterations of the winning restart
    histories: list[list[float]] = field(default_factory=list)  # per-restart inertia traces


def embed_all(dataset: EmbeddingDataset, head: ProjectionHead, chunk: int = 4096) -> np.ndarray:
    """One unit vector per detection: project each stored view (eval mode),
    L2-normalize, average over views, renormalize."""
    head.eval()
    m = dataset.num_records
    v = dataset.views_per_detection
    proj_all = np.empty((m * v, 64), dtype=np.float64)
    flat = dataset.views.reshape(m * v, dataset.embedding_dim)
    for a in range(0, m * v, chunk):
        proj = head.forward(flat[a : a + chunk]).astype(np.float64)
        norms = np.linalg.norm(proj, axis=1, keepdims=True)
        if not np.all(norms > 0):
            raise DegenerateFeatureError("projection collapsed to a zero vector")
        proj_all[a : a + chunk] = proj / norms
    pooled = proj_all.reshape(m, v, 64).mean(axis=1)
    norms = np.linalg.norm(pooled, axis=1, keepdims=True)
    if not np.all(norms > 0):
        raise DegenerateFeatureError("pooled views cancelled to a zero vector")
    return pooled / norms


def _plus_plus_seeds(pts: np.ndarray, k: int, order: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    """k-means++ over the canonically ordered points."""
    canon = pts[order]
    m = canon.shape[0]
    centers = np.empty((k, pts.shape[1]), dtype=pts.dtype)
    centers[0] = canon[rng.integers(m)]
    d2 = ((canon - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(m))  # all remaining mass on duplicates
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random(), side="right"))
            idx = min(idx, m - 1)
        centers[c] = canon[idx]
        d2 = np.minimum(d2, ((canon - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(pts, centers, order, max_iter):
    m, k = pts.shape[0], centers.shape[0]
    assign = np.full(m, -1, dtype=np.int64)
    history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        point_d2 = d2[np.arange(m), new_assign]
        # repair empty clusters by stealing the farthest point (canonical-order ties)
        for c in range(k):
            if not np.any(new_assign == c):
                far_pos = int(np.argmax(point_d2[order]))
                far = int(order[far_pos])
                new_assign[far] = c
                point_d2[far] = -1.0  # a stolen point can never be stolen twice
        for c in range(k):
            members = new_assign == c
            centers[c] = pts[members].mean(axis=0)
        inertia = float(((pts - centers[new_assign]) ** 2).sum())
        if history and inertia > history[-1] * (1 + 1e-12) + 1e-12:
            raise InvariantError(
                f"inertia increased across a Lloyd iteration: {history[-1]} -> {inertia}"
            )
        history.append(inertia)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign, centers, history[-1], iterations, history


def kmeans(points: np.ndarray, k: int, seed: int = 0,
           restarts: int = DEFAULT_RESTARTS, max_iter: int = MAX_LLOYD_ITERATIONS) -> ClusterResult:
    """Best of `restarts` k-means++/Lloyd runs by inertia (ties: lowest
    restart index). Deterministic given seed."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ConfigError(f"points must be 2-D, got shape {pts.shape}")
    m = pts.shape[0]
    if k < 1 or m < k:
        raise ConfigError(f"need M >= k >= 1, got M={m}, k={k}")
    order = np.lexsort(pts.T[::-1])  # canonical: rows sorted lexicographically

    best: ClusterResult | None = None
    histories: list[list[float]] = []
    for r in range(restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, r])))
        centers = _plus_plus_seeds(pts, k, order, rng)
        assign, centers, inertia, iterations, history = _lloyd(pts, centers, order, max_iter)
        histories.append(history)
        if best is None or inertia < best.inertia:
            best = ClusterResult(assignments=assign, centers=centers,
                                 inertia=inertia, iterations=iterations)
    best.histories = histories
    return best


def cluster_dataset(dataset: EmbeddingDataset, head: ProjectionHead, n_clusters: int,
                    seed: int = 0, restarts: int = DEFAULT_RESTARTS,
                    per_view: bool = False) -> ClusterResult:
    """Embed and cluster a whole dataset. per_view clusters every view
    embedding separately and majority-votes per detection (ties: lowest
    cluster index)."""
    if not per_view:
        return kmeans(embed_all(dataset, head), n_clusters, seed=seed, restarts=restarts)

    head.eval()
    m = dataset.num_records
    v = dataset.views_per_detection
    flat = dataset.views.reshape(m * v, dataset.embedding_dim)
    proj = np.empty((m * v, 64), dtype=np.float64)
    for a in range(0, m * v, 4096):
        block = head.forward(flat[a : a + 4096]).astype(np.float64)
        norms = np.linalg.norm(block, axis=1, keepdims=True)
        if not np.all(norms > 0):
            raise DegenerateFeatureError("projection collapsed to a zero vector")
        proj[a : a + 4096] = block / norms
    result = kmeans(proj, n_clusters, seed=seed, restarts=restarts)
    votes = result.assignments.reshape(m, v)
    per_det = np.empty(m, dtype=np.int64)
    for i in range(m):
        counts = np.bincount(votes[i], minlength=n_clusters)
        per_det[i] = int(counts.argmax())
    return ClusterResult(assignments=per_det, centers=result.centers,
                         inertia=result.inertia, iterations=result.iterations,
                         histories=result.histories)
