"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same signatures; see
:mod:`mixbayes.kernels` for the selection logic. These versions vectorize over
the batch dimension instead of looping over signals.
"""
import numpy as np


def _kkt_residual(beta, q, lam):
    on = beta != 0
    r = np.where(on, np.abs(q - lam * np.sign(beta)), np.maximum(np.abs(q) - lam, 0.0))
    return r.max(axis=1) if r.shape[1] else np.zeros(r.shape[0])


def lasso_cd(G, C, lam, beta0, tol, max_sweeps):
    """Coordinate descent for min_b 1/2 b^T G b - c^T b + lam |b|_1, row-wise.

    G: (d, d) Gram matrix with positive diagonal, C: (N, d) linear terms,
    beta0: (N, d) warm start. Returns (beta, sweeps, converged) where
    ``sweeps`` is the largest sweep count used by any row and ``converged``
    is a boolean array; a row converges once its subgradient (KKT) residual
    drops to ``tol``.
    """
    G = np.ascontiguousarray(G, dtype=float)
    beta = np.array(beta0, dtype=float, copy=True)
    C = np.asarray(C, dtype=float)
    N, d = beta.shape
    diag = np.diag(G).copy()
    q = C - beta @ G
    converged = _kkt_residual(beta, q, lam) <= tol
    active = np.flatnonzero(~converged)
    sweeps = 0
    while active.size and sweeps < max_sweeps:
        sweeps += 1
        b = beta[active]
        qa = q[active]
        for j in range(d):
            old = b[:, j]
            v = qa[:, j] + diag[j] * old
            new = np.sign(v) * np.maximum(np.abs(v) - lam, 0.0) / diag[j]
            delta = new - old
            if np.any(delta):
                b[:, j] = new
                qa -= np.outer(delta, G[j])
        # refresh q to stop rounding drift from accumulating
        qa = C[active] - b @ G
        beta[active] = b
        q[active] = qa
        done = _kkt_residual(b, qa, lam) <= tol
        converged[active[done]] = True
        active = active[~done]
    return beta, sweeps, converged


def weighted_l2_prox(c, k, tau, rtol=1e-12, max_iter=400):
    """Prox of tau * |C b|_2 in the eigenbasis of the symmetric PSD matrix C.

    ``c`` (N, p) are the coordinates of each input in the eigenbasis of C and
    ``k`` (p,) the eigenvalues of C. ``tau`` is a scalar or (N,) array.
    Returns the output coordinates in the same basis.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    k = np.asarray(k, dtype=float)
    N, p = c.shape
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (N,)).copy()
    pos = k > 0
    out = np.where(pos, 0.0, c)
    # first branch test: |(C C^T)^+ C b| <= tau
    first = np.sqrt(np.sum((c[:, pos] / k[pos]) ** 2, axis=1)) <= tau
    rows = np.flatnonzero(~first)
    if rows.size == 0:
        return out
    kc = k[pos] * c[rows][:, pos]
    k2 = k[pos] ** 2
    inv_tau = 1.0 / tau[rows]
    lo = np.zeros(rows.size)
    hi = np.sqrt(np.sum(kc**2, axis=1)) * inv_tau
    alpha = np.zeros(rows.size)
    active = np.ones(rows.size, dtype=bool)
    for _ in range(max_iter):
        # Newton on phi(a) = 1/|w(a)| - 1/tau, w_j = k_j c_j / (k_j^2 + a)
        g = k2 + alpha[:, None]
        w2 = (kc / g) ** 2
        q = w2.sum(axis=1)
        dq = (w2 / g).sum(axis=1)
        phi = 1.0 / np.sqrt(q) - inv_tau
        lo = np.where(active & (phi < 0), alpha, lo)
        hi = np.where(active & (phi >= 0), alpha, hi)
        active &= (hi - lo > rtol * hi) & (dq > 0)
        if not active.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = alpha - phi * q * np.sqrt(q) / dq
        nxt = np.where((nxt > lo) & (nxt < hi), nxt, 0.5 * (lo + hi))
        done = np.abs(nxt - alpha) <= rtol * nxt
        alpha = np.where(active, nxt, alpha)
        active &= ~done
        if not active.any():
            break
    out[rows] = c[rows] * (alpha[:, None] / (k**2 + alpha[:, None]))
    return out
