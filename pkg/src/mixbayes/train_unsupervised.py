"""Unsupervised fit: subspace clustering, then per-cluster moments."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from .estimator import PreparedEstimator, prepare
from .model import MixtureModel, NoiseModel
from .rng import make_rng

__all__ = [
    "ClusteringConfig",
    "ClusterStats",
    "finite_difference",
    "kmeans",
    "subspace_cluster",
    "estimate_params",
    "cluster_signals",
    "fit_unsupervised",
]


@dataclass(frozen=True)
class ClusteringConfig:
    """Settings for least-squares-regression subspace clustering.

    ``lsr_lambda=None`` means 1e-2 * trace(X X^T) / N. ``spectral_dims=None``
    embeds in as many eigenvectors as there are clusters.
    """

    n_clusters: int
    lsr_lambda: Optional[float] = None
    preprocessing: str = "identity"
    spectral_dims: Optional[int] = None
    kmeans_restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("need at least one cluster")
        if self.lsr_lambda is not None and not self.lsr_lambda > 0:
            raise ValueError("lsr_lambda must be positive")
        if self.preprocessing not in ("identity", "finite_difference"):
            raise ValueError(f"unknown preprocessing {self.preprocessing!r}")


@dataclass(frozen=True)
class ClusterStats:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    labels: np.ndarray  # the cluster ids kept, in order

    @property
    def L(self) -> int:
        return self.weights.shape[0]

    def to_model(self) -> MixtureModel:
        w = self.weights / self.weights.sum()
        return MixtureModel(w, self.means, self.covariances)


def finite_difference(x) -> np.ndarray:
    """Forward differences x[k+1] - x[k] along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise ValueError("need at least two samples to difference")
    return np.diff(x, axis=-1)


def _kmeanspp(X, k, rng):
    N = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(N)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        tot = d2.sum()
        if tot <= 0:
            centers[j] = X[rng.integers(N)]
        else:
            centers[j] = X[rng.choice(N, p=d2 / tot)]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(X, centers, max_iter=300):
    x2 = np.sum(X * X, axis=1)[:, None]
    labels = None
    for _ in range(max_iter):
        d2 = x2 - 2 * X @ centers.T + np.sum(centers * centers, axis=1)
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
    d2 = x2 - 2 * X @ centers.T + np.sum(centers * centers, axis=1)
    labels = np.argmin(d2, axis=1)
    inertia = float(np.sum(np.maximum(d2[np.arange(X.shape[0]), labels], 0.0)))
    return labels, centers, inertia


def kmeans(X, k: int, restarts: int = 10, seed: int = 0):
    """Lloyd's algorithm from k-means++ seeds; best of ``restarts`` by inertia.

    Returns (labels, centers).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < k:
        raise ValueError("fewer samples than clusters")
    best = None
    for r in range(restarts):
        rng = make_rng(seed, "kmeans", r)
        labels, centers, inertia = _lloyd(X, _kmeanspp(X, k, rng))
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best[0], best[1]


def _canonical_labels(labels):
    """Rename clusters in order of first appearance."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inv]


def subspace_cluster(X, config: ClusteringConfig) -> np.ndarray:
    """Cluster rows of X lying near a union of subspaces.

    Least-squares-regression affinity Z = (X X^T + lam I)^{-1} X X^T,
    W = |Z| + |Z^T|, then spectral clustering on the symmetric-normalized
    graph (row-normalized eigenvector embedding + k-means). Labels are
    0-based and numbered in order of first appearance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    k = config.n_clusters
    if N < k:
        raise ValueError("fewer samples than clusters")
    if k == 1:
        return np.zeros(N, dtype=int)
    gram = X @ X.T
    lam = config.lsr_lambda
    if lam is None:
        lam = 1e-2 * np.trace(gram) / N
        if lam <= 0:
            lam = 1e-12
    Z = np.linalg.solve(gram + lam * np.eye(N), gram)
    W = np.abs(Z) + np.abs(Z.T)
    deg = W.sum(axis=1)
    if np.any(deg <= 1e-300):
        warnings.warn("degenerate affinity (isolated samples); falling back to k-means", RuntimeWarning)
        labels, _ = kmeans(X, k, config.kmeans_restarts, config.seed)
        return _canonical_labels(labels)
    dinv = 1.0 / np.sqrt(deg)
    Nsym = W * dinv[:, None] * dinv[None, :]
    dims = config.spectral_dims or k
    # bottom eigenvectors of I - Nsym are the top ones of Nsym
    _, vecs = eigh(0.5 * (Nsym + Nsym.T), subset_by_index=[N - dims, N - 1])
    emb = vecs / np.maximum(np.linalg.norm(vecs, axis=1, keepdims=True), 1e-300)
    labels, _ = kmeans(emb, k, config.kmeans_restarts, config.seed)
    return _canonical_labels(labels)


def estimate_params(X, labels) -> ClusterStats:
    """Empirical weight, mean and covariance (divisor N_i) of each cluster.

    Cluster ids absent from ``labels`` are simply not represented; the
    returned ``L`` is the number of nonempty clusters.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise ValueError("one label per sample required")
    ids = np.unique(labels)
    N, n = X.shape
    w = np.empty(ids.size)
    mu = np.empty((ids.size, n))
    cov = np.empty((ids.size, n, n))
    for j, lab in enumerate(ids):
        Xi = X[labels == lab]
        w[j] = Xi.shape[0] / N
        mu[j] = Xi.mean(axis=0)
        Xc = Xi - mu[j]
        C = Xc.T @ Xc / Xi.shape[0]
        cov[j] = 0.5 * (C + C.T)
    return ClusterStats(w / w.sum(), mu, cov, ids)


def cluster_signals(X, config: ClusteringConfig) -> np.ndarray:
    feats = finite_difference(X) if config.preprocessing == "finite_difference" else X
    return subspace_cluster(feats, config)


def fit_unsupervised(trainset, operator, noise: NoiseModel, config: ClusteringConfig, labels=None) -> PreparedEstimator:
    """Cluster clean training signals, fit moments, and prepare the estimator.

    Preprocessing only affects clustering; moments come from the raw signals.
    Passing ``labels`` skips clustering (exact or random labelling ablations).
    """
    X = np.atleast_2d(np.asarray(trainset, dtype=float))
    if labels is None:
        labels = cluster_signals(X, config)
    stats = estimate_params(X, labels)
    return prepare(stats.to_model(), operator, noise)
