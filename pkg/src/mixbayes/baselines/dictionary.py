"""Sparse coding, dictionary learning and dictionary-constrained reconstruction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..rng import make_rng
from .solvers import SolveResult, spectral_norm

__all__ = [
    "Dictionary",
    "ConvergenceError",
    "sparse_code",
    "sparse_code_objective",
    "dict_learn",
    "dl_reconstruct",
    "group_dl_reconstruct",
]



class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dictionary:
    """Injective dictionary with unit-norm atoms (columns), d <= n."""

    D: np.ndarray
    objective: tuple = field(default=(), compare=False)
    resets: int = field(default=0, compare=False)

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        object.__setattr__(self, "D", D)
        n, d = D.shape
        if d > n:
            raise ValueError("redundant dictionaries (d > n) are not supported")
        if np.abs(np.linalg.norm(D, axis=0) - 1.0).max() > 1e-10:
            raise ValueError("dictionary atoms must have unit norm")
        if np.linalg.svd(D, compute_uv=False)[-1] <= 1e-8:
            raise ValueError("dictionary is not injective")
        object.__setattr__(self, "_gram", D.T @ D)

    @property
    def gram(self) -> np.ndarray:
        return self._gram

    @property
    def n_atoms(self) -> int:
        return self.D.shape[1]

    def pinv(self) -> np.ndarray:
        return np.linalg.solve(self._gram, self.D.T)


def sparse_code_objective(D, Z, B, lam):
    Z = np.atleast_2d(Z)
    B = np.atleast_2d(B)
    r = Z - B @ D.T
    return 0.5 * np.sum(r * r, axis=1) + lam * np.sum(np.abs(B), axis=1)


def _kkt_residual(G, c, b, lam):
    q = c - G @ b
    on = b != 0
    r = np.where(on, np.abs(q - lam * np.sign(b)), np.maximum(np.abs(q) - lam, 0.0))
    return float(r.max()) if r.size else 0.0


def _polish(G, c, b, lam, tol):
    """Exact solve on the support and signs of ``b``; None unless it passes the KKT test.

    On the true support with signs s the minimizer solves
    G_SS b_S = c_S - lam s_S, so once coordinate descent has found the support
    this finishes the job exactly instead of crawling through an
    ill-conditioned Gram matrix.
    """
    sup = np.flatnonzero(b)
    out = np.zeros_like(b)
    if sup.size:
        sgn = np.sign(b[sup])
        try:
            sol = np.linalg.solve(G[np.ix_(sup, sup)], c[sup] - lam * sgn)
        except np.linalg.LinAlgError:
            return None
        if np.any(np.sign(sol) != sgn):
            return None
        out[sup] = sol
    return out if _kkt_residual(G, c, out, lam) <= tol else None


def sparse_code(D: Dictionary, z, lam, beta0=None, tol=1e-8, max_sweeps=100000, chunk=50):
    """argmin_b 1/2 |D b - z|^2 + lam |b|_1, by coordinate descent.

    Iterates until the subgradient residual is at most ``tol`` for every row.
    Every ``chunk`` sweeps, rows still running try an exact active-set solve
    on their current support. Raises :class:`ConvergenceError` when the sweep
    cap is hit first.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    C = Z @ D.D
    B = np.zeros_like(C) if beta0 is None else np.array(np.atleast_2d(beta0), dtype=float)
    G = D.gram
    todo = np.arange(C.shape[0])
    used = 0
    while todo.size:
        step = min(chunk, max_sweeps - used)
        Bt, _, conv = kernels.lasso_cd(G, C[todo], float(lam), B[todo], float(tol), int(step))
        B[todo] = Bt
        used += step
        left = []
        for r, ok in zip(todo, conv):
            if ok:
                continue
            p = _polish(G, C[r], B[r], lam, tol)
            if p is None:
                left.append(r)
            else:
                B[r] = p
        todo = np.array(left, dtype=int)
        if todo.size and used >= max_sweeps:
            raise ConvergenceError(f"sparse coding did not converge within {max_sweeps} sweeps")
    return B[0] if single else B


def _init_atoms(X, d):
    """Top-d right singular vectors of the (uncentered) data: orthonormal atoms."""
    _, _, Vt = np.linalg.svd(X, full_matrices=False)
    V = Vt[:d].T
    if V.shape[1] < d:
        V = np.hstack([V, np.zeros((X.shape[1], d - V.shape[1]))])
    return V


def _objective(X, D, B, lam):
    return float(np.mean(sparse_code_objective(D, X, B, lam)))


# atoms are unit norm, so this keeps the Gram matrix comfortably invertible
_SV_FLOOR = 1e-3


def _repair(Dm, X, B, rng):
    """Replace collapsed atoms until the smallest singular value clears the floor.

    The most dependent atom (largest entry of the bottom right singular
    vector) is replaced by the worst-represented sample. When the samples span
    too few dimensions for that to help, a random direction orthogonal to the
    other atoms is used instead. Returns (atoms, number of replacements).
    """
    d = Dm.shape[1]
    resid = np.sum((X - B @ Dm.T) ** 2, axis=1)
    worst = X[int(np.argmax(resid))]
    resets = 0
    for _ in range(d):
        _, sv, Vt = np.linalg.svd(Dm, full_matrices=False)
        if sv[-1] > _SV_FLOOR:
            break
        j = int(np.argmax(np.abs(Vt[-1])))
        trial = Dm.copy()
        nrm = np.linalg.norm(worst)
        if nrm > 0:
            trial[:, j] = worst / nrm
        if nrm == 0 or np.linalg.svd(trial, compute_uv=False)[-1] <= _SV_FLOOR:
            others = np.delete(Dm, j, axis=1)
            Q, _ = np.linalg.qr(others) if others.size else (np.zeros((Dm.shape[0], 0)), None)
            g = rng.standard_normal(Dm.shape[0])
            g -= Q @ (Q.T @ g)
            trial[:, j] = g / np.linalg.norm(g)
        Dm = trial
        resets += 1
    return Dm, resets


def dict_learn(X, d: int, lam: float, epochs: int = 20, seed: int = 0, tol: float = 1e-8) -> Dictionary:
    """Learn a unit-norm dictionary by alternating minimization.

    Each epoch sparse-codes every sample (warm-started) and then updates the
    atoms one at a time, each atom being the exact minimizer of the data term
    over the unit sphere with the others held fixed. Unused atoms are left
    alone, so with all codes zero the dictionary does not change. Atoms that
    collapse onto the span of the others are replaced (see ``_repair``) and
    counted in ``resets``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, n = X.shape
    if d > n:
        raise ValueError("d must not exceed the signal dimension")
    if N < d:
        raise ValueError("need at least d training samples")
    rng = make_rng(seed, "dict-learn")
    Dm, resets = _repair(_init_atoms(X, d), X, np.zeros((N, d)), rng)
    D = Dictionary(Dm)
    B = np.zeros((N, d))
    trace = []
    for _ in range(epochs):
        B = sparse_code(D, X, lam, beta0=B, tol=tol)
        trace.append(_objective(X, D.D, B, lam))
        if not np.any(B):
            continue
        Dm = D.D.copy()
        Amat = B.T @ B
        Bmat = X.T @ B
        for j in range(d):
            if Amat[j, j] == 0:
                continue
            r = Bmat[:, j] - Dm @ Amat[:, j] + Amat[j, j] * Dm[:, j]
            nrm = np.linalg.norm(r)
            if nrm > 0:
                Dm[:, j] = r / nrm
        Dm, k = _repair(Dm, X, B, rng)
        resets += k
        D = Dictionary(Dm)
        trace.append(_objective(X, D.D, B, lam))
    B = sparse_code(D, X, lam, beta0=B, tol=tol)
    trace.append(_objective(X, D.D, B, lam))
    return Dictionary(D.D, objective=tuple(trace), resets=resets)


def _stepsize(A, t):
    bound = spectral_norm(A) ** 2
    if t is None:
        return 0.99 / bound if bound > 0 else 1.0
    if not t > 0 or t * bound > 1.0 + 1e-8:
        raise ValueError(f"stepsize {t} exceeds the stability bound 1/|A|^2 = {1.0 / bound:.6g}")
    return t


def dl_reconstruct(y, A, D: Dictionary, lam, t=None, max_iters=500, tol=1e-8) -> SolveResult:
    """Minimize 1/2 |y - A x|^2 + lam (|D^+ x|_1 + indicator of range(D)).

    Proximal gradient on x, the prox being x = D sparse_code(D, z, lam t).
    With A = I and t = 1 this stops after one step at D sparse_code(D, y, lam).
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    t = _stepsize(A, t)
    n = A.shape[1]
    X = np.zeros((Y.shape[0], n))
    B = np.zeros((Y.shape[0], D.n_atoms))
    AtY = Y @ A
    AtA = A.T @ A
    rel = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        Zk = X - t * (X @ AtA - AtY)
        B = sparse_code(D, Zk, lam * t, beta0=B)
        X_new = B @ D.D.T
        rel = float(np.max(np.linalg.norm(X_new - X, axis=1) / (1.0 + np.linalg.norm(X, axis=1))))
        X = X_new
        if rel <= tol:
            break
    r = Y - X @ A.T
    f = 0.5 * np.sum(r * r, axis=1) + lam * np.sum(np.abs(B), axis=1)
    return SolveResult(B[0] if single else B, it, rel <= tol, rel, f, x=X[0] if single else X)


def group_prox_select(dicts, Z, tau, warm=None):
    """Prox of tau * min_i G_i: per row, the best of the per-dictionary proxes.

    Returns (selected index per row, codes per dictionary, proxes per dictionary).
    """
    costs, codes, proxes = [], [], []
    for i, D in enumerate(dicts):
        B = sparse_code(D, Z, tau, beta0=None if warm is None else warm[i])
        P = B @ D.D.T
        costs.append(0.5 * np.sum((Z - P) ** 2, axis=1) + tau * np.sum(np.abs(B), axis=1))
        codes.append(B)
        proxes.append(P)
    # argmin picks the lowest index on ties
    sel = np.argmin(np.stack(costs, axis=1), axis=1)
    return sel, codes, proxes


def group_dl_reconstruct(y, A, dicts, lam, cfg=None) -> SolveResult:
    """Proximal gradient for 1/2 |y - A x|^2 + lam min_i G_i(x).

    ``cfg`` keys: t, max_iters (default 500), tol (default 1e-8). ``coef``
    of the result holds the selected dictionary index per row.
    """
    cfg = dict(cfg or {})
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    t = _stepsize(A, cfg.get("t"))
    max_iters = int(cfg.get("max_iters", 500))
    tol = float(cfg.get("tol", 1e-8))
    X = np.zeros((Y.shape[0], A.shape[1]))
    AtY = Y @ A
    AtA = A.T @ A
    warm = None
    rows = np.arange(Y.shape[0])
    sel = np.zeros(Y.shape[0], dtype=int)
    rel = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        Zk = X - t * (X @ AtA - AtY)
        sel, codes, proxes = group_prox_select(dicts, Zk, lam * t, warm)
        warm = codes
        X_new = np.stack(proxes, axis=0)[sel, rows]
        rel = float(np.max(np.linalg.norm(X_new - X, axis=1) / (1.0 + np.linalg.norm(X, axis=1))))
        X = X_new
        if rel <= tol:
            break
    B_sel = [codes[s][r] for r, s in enumerate(sel)]
    pen = np.array([np.abs(b).sum() for b in B_sel])
    r = Y - X @ A.T
    f = 0.5 * np.sum(r * r, axis=1) + lam * pen
    return SolveResult(sel[0] if single else sel, it, rel <= tol, rel, f, x=X[0] if single else X)
