"""Proximal maps and projections used by the sparse-recovery baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import kernels

__all__ = [
    "soft_threshold",
    "prox_weighted_l2",
    "weighted_norm",
    "SparsitySet",
    "project_sparse",
]


def soft_threshold(v, lam):
    """Componentwise max(|v| - lam, 0) * sign(v)."""
    if np.any(np.asarray(lam) < 0):
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def _sqrt_eig(K):
    """Eigenvalues of K^{1/2} and the shared eigenvectors (K symmetric PSD)."""
    vals, vecs = np.linalg.eigh(0.5 * (K + K.T))
    top = max(vals[-1], 0.0) if vals.size else 0.0
    vals = np.where(vals > 1e-14 * top, vals, 0.0)
    return np.sqrt(vals), vecs


def weighted_norm(beta, K):
    """|beta|_K = sqrt(beta^T K beta), row-wise for a batch."""
    beta = np.asarray(beta, dtype=float)
    return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", beta, K, beta), 0.0))


def prox_weighted_l2(beta, K, tau, eig=None):
    """Prox of ``tau * |.|_K`` where |b|_K = sqrt(b^T K b) = |K^{1/2} b|_2.

    Uses the two-branch closed form for the prox of |C b| with C = K^{1/2}:
    the kernel-projection branch when |(C C^T)^+ C b| <= tau, else
    b - C^T (C C^T + a I)^{-1} C b with a the positive root of
    |(C C^T + a I)^{-1} C b|^2 = tau^2, found by
    safeguarded Newton iteration inside a shrinking bracket. Works on a single
    vector or row-wise on a batch. ``eig`` may carry a precomputed
    ``(sqrt_eigenvalues, eigenvectors)`` pair for K.
    """
    if np.any(np.asarray(tau) <= 0):
        raise ValueError("tau must be positive")
    beta = np.asarray(beta, dtype=float)
    k, U = eig if eig is not None else _sqrt_eig(np.asarray(K, dtype=float))
    single = beta.ndim == 1
    c = np.atleast_2d(beta) @ U
    out = kernels.weighted_l2_prox(c, k, tau) @ U.T
    return out[0] if single else out


@dataclass(frozen=True)
class SparsitySet:
    """Either all s-sparse vectors, or a union of listed subspaces.

    ``subspaces`` holds, for the union kind, either integer index arrays
    (coordinate subspaces) or matrices with orthonormal columns (frames).
    """

    kind: str
    s: Optional[int] = None
    subspaces: tuple = ()

    def __post_init__(self):
        if self.kind == "top_s":
            if self.s is None or self.s < 0:
                raise ValueError("top_s needs a nonnegative s")
        elif self.kind == "subspace_union":
            if not self.subspaces:
                raise ValueError("subspace_union needs at least one subspace")
            subs = []
            for S in self.subspaces:
                S = np.asarray(S)
                if S.ndim == 1:
                    subs.append(S.astype(int))
                else:
                    subs.append(S.astype(float))
            object.__setattr__(self, "subspaces", tuple(subs))
        else:
            raise ValueError(f"unknown sparsity set kind {self.kind!r}")

    @classmethod
    def top(cls, s: int) -> "SparsitySet":
        return cls("top_s", s=int(s))

    @classmethod
    def union(cls, subspaces) -> "SparsitySet":
        return cls("subspace_union", subspaces=tuple(subspaces))


def _top_s(B, s, free):
    N, p = B.shape
    if free is None:
        cand = np.arange(p)
    else:
        cand = np.flatnonzero(free)
    out = np.zeros_like(B) if free is None else np.where(free, 0.0, B)
    if s >= cand.size:
        out[:, cand] = B[:, cand]
        return out
    if s == 0:
        return out
    mags = np.abs(B[:, cand])
    # stable sort on -|b|: equal magnitudes keep the lower index first
    order = np.argsort(-mags, axis=1, kind="stable")[:, :s]
    rows = np.arange(N)[:, None]
    keep = cand[order]
    out[rows, keep] = B[rows, keep]
    return out


def project_sparse(beta, S: SparsitySet, free=None):
    """Euclidean projection onto the sparsity set.

    ``free`` optionally marks (boolean mask) the coordinates that are
    constrained; the rest pass through untouched. Only the top_s kind
    supports a mask.
    """
    beta = np.asarray(beta, dtype=float)
    single = beta.ndim == 1
    B = np.atleast_2d(beta)
    if S.kind == "top_s":
        out = _top_s(B, S.s, None if free is None else np.asarray(free, bool))
    else:
        if free is not None:
            raise ValueError("masks are only supported for top_s sets")
        best = np.full(B.shape[0], np.inf)
        out = np.zeros_like(B)
        for sub in S.subspaces:
            if sub.dtype.kind == "i":
                P = np.zeros_like(B)
                P[:, sub] = B[:, sub]
            else:
                P = (B @ sub) @ sub.T
            dist = np.sum((B - P) ** 2, axis=1)
            better = dist < best
            out[better] = P[better]
            best = np.where(better, dist, best)
    return out[0] if single else out
