"""Synthesis bases inferred from training data."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .prox import SparsitySet, _sqrt_eig

__all__ = ["SynthesisBasis", "GroupBases", "svd_basis", "group_svd_bases", "fix_signs"]


@dataclass(frozen=True)
class SynthesisBasis:
    """Synthesis operator M mapping coefficients to signals, x = M b.

    Square M must be orthogonal. A wide M (n x p, p > n) is accepted when its
    rows are orthonormal, which covers a zero-padded orthogonal transform
    followed by cropping.
    """

    M: np.ndarray
    variances: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        object.__setattr__(self, "M", M)
        n, p = M.shape
        if p < n:
            raise ValueError("synthesis operator needs at least as many columns as rows")
        if np.abs(M @ M.T - np.eye(n)).max() > 1e-10:
            raise ValueError("synthesis operator rows are not orthonormal")

    @property
    def shape(self):
        return self.M.shape

    @classmethod
    def canonical(cls, n: int) -> "SynthesisBasis":
        return cls(np.eye(n))


@dataclass(frozen=True)
class GroupBases:
    """Per-group orthogonal bases M_i and penalty matrices K_i.

    K_i acts on the coefficient vector of group i, i.e. it is expressed in
    the coordinates of M_i.
    """

    bases: tuple
    penalties: tuple
    _eigs: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        bases = tuple(np.asarray(M, dtype=float) for M in self.bases)
        pens = tuple(np.asarray(K, dtype=float) for K in self.penalties)
        if len(bases) != len(pens) or not bases:
            raise ValueError("need one penalty matrix per basis")
        n = bases[0].shape[0]
        for i, (M, K) in enumerate(zip(bases, pens)):
            if M.shape != (n, n) or np.abs(M.T @ M - np.eye(n)).max() > 1e-10:
                raise ValueError(f"basis {i} is not an orthogonal {n}x{n} matrix")
            if K.shape != (n, n) or np.abs(K - K.T).max() > 1e-10 * max(1.0, np.abs(K).max()):
                raise ValueError(f"penalty {i} is not symmetric")
            if np.linalg.eigvalsh(K)[0] < -1e-10 * max(1.0, np.abs(K).max()):
                raise ValueError(f"penalty {i} is not positive semidefinite")
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "penalties", pens)
        object.__setattr__(self, "_eigs", tuple(_sqrt_eig(K) for K in pens))

    @property
    def L(self) -> int:
        return len(self.bases)

    @property
    def n(self) -> int:
        return self.bases[0].shape[0]

    def stacked(self) -> np.ndarray:
        """[M_1 | ... | M_L], shape (n, n L)."""
        return np.hstack(self.bases)


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _eig_desc(X):
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / X.shape[0]
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(vals, kind="stable")[::-1]
    return np.maximum(vals[order], 0.0), fix_signs(vecs[:, order]), cov


def svd_basis(X) -> SynthesisBasis:
    """Eigenbasis of the empirical covariance, eigenvalues descending."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    vals, vecs, _ = _eig_desc(X)
    return SynthesisBasis(vecs, variances=vals)


def group_svd_bases(X, labels, s: int):
    """Per-cluster eigenbases.

    Returns ``(GroupBases, SparsitySet)``: the full per-cluster bases with
    penalties K_i = (Sigma_i + eps I)^{-1/2} written in each basis'
    coordinates (so diagonal), eps = 1e-8 * trace(Sigma_i) / n, and the union
    of the spans of each cluster's top-s eigenvectors. Clusters with fewer than
    two samples use the global basis instead.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels)
    n = X.shape[1]
    if not 1 <= s <= n:
        raise ValueError(f"s must lie in [1, {n}]")
    glob_vals, glob_vecs, _ = _eig_desc(X)
    bases, pens, frames = [], [], []
    for lab in np.unique(labels):
        Xi = X[labels == lab]
        if Xi.shape[0] >= 2:
            vals, vecs, _ = _eig_desc(Xi)
        else:
            vals, vecs = glob_vals, glob_vecs
        eps = 1e-8 * vals.sum() / n
        if eps <= 0:
            eps = 1e-8
        bases.append(vecs)
        pens.append(np.diag((vals + eps) ** -0.5))
        frames.append(vecs[:, :s])
    return GroupBases(tuple(bases), tuple(pens)), SparsitySet.union(frames)
