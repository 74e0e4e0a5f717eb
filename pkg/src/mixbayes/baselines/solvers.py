"""Proximal-gradient solvers: LASSO (ISTA), IHT and group LASSO.

All solvers accept a single observation (m,) or a batch (N, m) and iterate
every row in lockstep; iteration stops once every row satisfies the relative
change test |b_{k+1} - b_k| <= tol (1 + |b_k|).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..rng import make_rng
from .bases import GroupBases, SynthesisBasis
from .prox import SparsitySet, project_sparse, soft_threshold, weighted_norm
from .. import kernels

__all__ = [
    "SolveResult",
    "spectral_norm",
    "default_stepsize",
    "lasso_objective",
    "ista_lasso",
    "iht",
    "group_lasso",
    "group_lasso_objective",
]


@dataclass
class SolveResult:
    coef: np.ndarray
    n_iter: int
    converged: bool
    residual: float
    objective: np.ndarray
    x: Optional[np.ndarray] = None
    history: list = field(default_factory=list)

    def report(self) -> dict:
        return {
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
            "final_relative_change": float(self.residual),
            "mean_objective": float(np.mean(self.objective)),
        }


def spectral_norm(A: np.ndarray, iters: int = 50) -> float:
    """Largest singular value of A by power iteration on A^T A."""
    A = np.atleast_2d(A)
    v = make_rng(0, "power-iteration").standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        s = np.sqrt(nrm)
    return float(np.linalg.norm(A @ v)) if s else 0.0


def default_stepsize(AM: np.ndarray) -> float:
    return 0.99 / spectral_norm(AM) ** 2


def _check_step(t, AM):
    bound = spectral_norm(AM) ** 2
    if not t > 0 or t * bound > 1.0 + 1e-8:
        raise ValueError(f"stepsize {t} exceeds the stability bound 1/|AM|^2 = {1.0 / bound:.6g}")


def _setup(y, A, M):
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Mm = M.M if isinstance(M, SynthesisBasis) else np.atleast_2d(np.asarray(M, dtype=float))
    AM = A @ Mm
    if Y.shape[1] != AM.shape[0]:
        raise ValueError(f"observation length {Y.shape[1]} does not match operator rows {AM.shape[0]}")
    return Y, single, AM


def lasso_objective(y, AM, beta, lam, penalized=None):
    Y = np.atleast_2d(y)
    B = np.atleast_2d(beta)
    r = Y - B @ AM.T
    pen = np.abs(B) if penalized is None else np.abs(B) * penalized
    return 0.5 * np.sum(r * r, axis=1) + lam * np.sum(pen, axis=1)


def _proxgrad(Y, AM, t, step, max_iters, tol, objective, p):
    m = AM.shape[0]
    if p > m:
        # wide operator: two thin products beat the p x p Gram matrix
        def gradient(B):
            return (B @ AM.T - Y) @ AM
    else:
        H = AM.T @ AM
        C = Y @ AM

        def gradient(B):
            return B @ H - C

    B = np.zeros((Y.shape[0], p))
    rel = np.inf
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        B_new = step(B - t * gradient(B))
        change = np.linalg.norm(B_new - B, axis=1)
        rel_rows = change / (1.0 + np.linalg.norm(B, axis=1))
        B = B_new
        rel = float(rel_rows.max())
        if objective is not None:
            history.append(float(np.mean(objective(B))))
        if rel <= tol:
            break
    return B, it, rel <= tol, rel, history


def ista_lasso(y, A, M, lam, t=None, max_iters=1000, tol=1e-8, penalized=None, track=False) -> SolveResult:
    """Minimize 1/2 |y - A M b|^2 + lam |b|_1 by iterative soft thresholding.

    ``penalized`` (boolean mask) restricts the l1 term to some coefficients;
    the others are plain least-squares unknowns.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    Y, single, AM = _setup(y, A, M)
    if t is None:
        t = default_stepsize(AM)
    _check_step(t, AM)
    mask = None if penalized is None else np.asarray(penalized, bool)
    thr = t * lam if mask is None else t * lam * mask

    def step(V):
        return soft_threshold(V, thr)

    obj = (lambda B: lasso_objective(Y, AM, B, lam, mask)) if track else None
    B, it, conv, rel, hist = _proxgrad(Y, AM, t, step, max_iters, tol, obj, AM.shape[1])
    f = lasso_objective(Y, AM, B, lam, mask)
    return SolveResult(B[0] if single else B, it, conv, rel, f, history=hist)


def iht(y, A, M, S: SparsitySet, t=None, max_iters=1000, tol=1e-8, free=None, track=False) -> SolveResult:
    """Projected gradient onto a union of subspaces (iterative hard thresholding).

    ``free`` (boolean mask, top_s sets only) marks the coefficients subject to
    the sparsity constraint; the others are unconstrained.
    """
    Y, single, AM = _setup(y, A, M)
    if t is None:
        t = default_stepsize(AM)
    _check_step(t, AM)

    def step(V):
        return project_sparse(V, S, free)

    def obj(B):
        r = Y - B @ AM.T
        return 0.5 * np.sum(r * r, axis=1)

    B, it, conv, rel, hist = _proxgrad(Y, AM, t, step, max_iters, tol, obj if track else None, AM.shape[1])
    return SolveResult(B[0] if single else B, it, conv, rel, obj(B), history=hist)


def group_lasso_objective(Y, A, bases: GroupBases, B, lam, smooth=0.0):
    Y = np.atleast_2d(Y)
    B = np.atleast_2d(B)
    n = bases.n
    X = B @ bases.stacked().T
    r = Y - X @ np.atleast_2d(A).T
    pen = 0.0
    for i, K in enumerate(bases.penalties):
        bi = B[:, i * n : (i + 1) * n]
        if smooth:
            pen = pen + np.sqrt(np.einsum("ij,jk,ik->i", bi, K, bi) + smooth**2)
        else:
            pen = pen + weighted_norm(bi, K)
    return 0.5 * np.sum(r * r, axis=1) + lam * pen


def _group_prox(bases: GroupBases, tau):
    """Blockwise prox of tau * |.|_{K_i}; per-group eigen data is resolved once."""
    n = bases.n
    parts = []
    for K, (k, U) in zip(bases.penalties, bases._eigs):
        d = np.diag(K)
        if np.count_nonzero(K - np.diag(d)) == 0:
            # diagonal K: the coordinate axes already are its eigenbasis
            parts.append((np.sqrt(np.maximum(d, 0.0)), None))
        else:
            parts.append((k, U))

    def prox(V):
        out = np.empty_like(V)
        for i, (k, U) in enumerate(parts):
            blk = V[:, i * n : (i + 1) * n]
            if U is None:
                out[:, i * n : (i + 1) * n] = kernels.weighted_l2_prox(blk, k, tau)
            else:
                out[:, i * n : (i + 1) * n] = kernels.weighted_l2_prox(blk @ U, k, tau) @ U.T
        return out

    return prox


def group_lasso(y, A, bases: GroupBases, lam, mode="proxgrad", cfg=None) -> SolveResult:
    """Minimize 1/2 |y - A sum_i M_i b_i|^2 + lam sum_i |b_i|_{K_i}.

    ``mode='proxgrad'`` runs proximal gradient with the blockwise weighted-l2
    prox; ``mode='adam'`` runs Adam on the objective with each norm smoothed
    to sqrt(b^T K b + eps^2). ``cfg`` keys: t, max_iters, tol (proxgrad);
    lr, iters, betas, eps_adam, smooth (adam). The result carries the
    coefficients (N, n L) and the reconstruction ``x = sum_i M_i b_i``.
    """
    cfg = dict(cfg or {})
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Mt = bases.stacked()
    Y, single, AM = _setup(y, A, Mt)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if mode == "proxgrad":
        t = cfg.get("t") or default_stepsize(AM)
        _check_step(t, AM)
        step = _group_prox(bases, t * lam) if lam > 0 else (lambda V: V)
        track = cfg.get("track", False)
        obj = (lambda B: group_lasso_objective(Y, A, bases, B, lam)) if track else None
        B, it, conv, rel, hist = _proxgrad(
            Y, AM, t, step, int(cfg.get("max_iters", 2000)), float(cfg.get("tol", 1e-8)), obj, AM.shape[1]
        )
    elif mode == "adam":
        B, it, conv, rel, hist = _group_lasso_adam(Y, A, AM, bases, lam, cfg)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    f = group_lasso_objective(Y, A, bases, B, lam)
    X = B @ Mt.T
    if single:
        return SolveResult(B[0], it, conv, rel, f, x=X[0], history=hist)
    return SolveResult(B, it, conv, rel, f, x=X, history=hist)


def _group_lasso_adam(Y, A, AM, bases, lam, cfg):
    lr = float(cfg.get("lr", 1e-2))
    iters = int(cfg.get("iters", 5000))
    b1, b2 = cfg.get("betas", (0.9, 0.999))
    eps = float(cfg.get("eps_adam", 1e-8))
    smooth = float(cfg.get("smooth", 1e-8))
    n = bases.n
    H = AM.T @ AM
    C = Y @ AM
    B = np.zeros((Y.shape[0], AM.shape[1]))
    m1 = np.zeros_like(B)
    m2 = np.zeros_like(B)
    f0 = float(np.mean(group_lasso_objective(Y, A, bases, B, lam, smooth)))
    history = []
    for k in range(1, iters + 1):
        g = B @ H - C
        for i, K in enumerate(bases.penalties):
            bi = B[:, i * n : (i + 1) * n]
            Kb = bi @ K
            nrm = np.sqrt(np.sum(bi * Kb, axis=1) + smooth**2)
            g[:, i * n : (i + 1) * n] += lam * Kb / nrm[:, None]
        m1 = b1 * m1 + (1 - b1) * g
        m2 = b2 * m2 + (1 - b2) * g * g
        # cosine decay to 1% of the base rate
        rate = lr * (0.01 + 0.99 * 0.5 * (1 + np.cos(np.pi * k / iters)))
        B = B - rate * (m1 / (1 - b1**k)) / (np.sqrt(m2 / (1 - b2**k)) + eps)
        if k % 100 == 0 or k == iters:
            f = float(np.mean(group_lasso_objective(Y, A, bases, B, lam, smooth)))
            history.append(f)
            if not np.isfinite(f) or f > 10 * max(f0, 1e-300):
                raise FloatingPointError(f"group LASSO (adam) diverged: objective {f:.3g} vs initial {f0:.3g}")
    return B, iters, True, 0.0, history
