"""Closed-form posterior-mean (MMSE) estimator under a Gaussian-mixture prior.

For y = A x + e with x drawn from the mixture and e ~ N(0, Sigma_E), the
posterior mean is a softmax-weighted sum of per-component Wiener estimates::

    S_i = A Sigma_i A^T + Sigma_E
    z_i = log w_i - 1/2 log((2 pi)^n |S_i|) - 1/2 |S_i^{-1/2} (y - A mu_i)|^2
    t_i = mu_i + Sigma_i A^T S_i^{-1} (y - A mu_i)
    R(y) = sum_i softmax(z)_i t_i

Everything here works from Cholesky factors of S_i; no inverse is formed.
The attention-style evaluation builds queries/keys/values whose Hadamard
row-sums reproduce z (see :func:`build_attention`).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import logsumexp, softmax

from .model import ForwardOperator, MixtureModel, NoiseModel

__all__ = [
    "PreparedEstimator",
    "AttentionTensors",
    "prepare",
    "component_logit",
    "component_logits",
    "responsibilities",
    "component_mean",
    "estimate",
    "build_attention",
    "estimate_attention",
    "posterior_mean_oracle",
]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PreparedEstimator:
    model: MixtureModel
    A: np.ndarray
    noise: NoiseModel
    chol: np.ndarray  # (L, m, m) lower-triangular factors of S_i
    log_const: np.ndarray  # (L,) l_i
    gain: np.ndarray  # (L, n, m) Sigma_i A^T
    Amu: np.ndarray  # (L, m)

    @property
    def L(self) -> int:
        return self.model.L

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def logdet(self, i: int) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol[i]))))

    def S(self, i: int) -> np.ndarray:
        C = self.chol[i]
        return C @ C.T


def prepare(model: MixtureModel, operator, noise: NoiseModel) -> PreparedEstimator:
    """Factor S_i for every component with positive weight.

    Zero-weight components are dropped and the remaining weights renormalized.
    ``operator`` may be a :class:`ForwardOperator` or a plain matrix.
    """
    A = operator.materialize() if isinstance(operator, ForwardOperator) else np.atleast_2d(np.asarray(operator, float))
    m, n = A.shape
    if model.n != n:
        raise ValueError(f"model dimension {model.n} does not match operator input dimension {n}")
    keep = np.flatnonzero(model.weights > 0)
    if keep.size < model.L:
        w = model.weights[keep] / model.weights[keep].sum()
        facs = None if model.factors is None else tuple(model.factors[i] for i in keep)
        model = MixtureModel(w, model.means[keep], model.covariances[keep], factors=facs)
    SE = noise.covariance(m)
    L = model.L
    chol = np.empty((L, m, m))
    gain = np.empty((L, n, m))
    log_const = np.empty(L)
    for i in range(L):
        G = model.covariances[i] @ A.T
        S = A @ G + SE
        S = 0.5 * (S + S.T)
        try:
            C = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise ValueError(f"A Sigma_{i} A^T + Sigma_E is not positive definite") from None
        chol[i] = C
        gain[i] = G
        logdet = 2.0 * np.sum(np.log(np.diag(C)))
        log_const[i] = math.log(model.weights[i]) - 0.5 * (n * LOG_2PI + logdet)
    Amu = model.means @ A.T
    return PreparedEstimator(model, A, noise, chol, log_const, gain, Amu)


def _as_batch(prep: PreparedEstimator, y):
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    if Y.shape[1] != prep.m:
        raise ValueError(f"observation length {Y.shape[1]} does not match m = {prep.m}")
    return Y, single


def _whitened_residual(prep: PreparedEstimator, Y: np.ndarray, i: int) -> np.ndarray:
    """C_i^{-1} (y - A mu_i) for every row of Y, returned as (m, N)."""
    return solve_triangular(prep.chol[i], (Y - prep.Amu[i]).T, lower=True, check_finite=False)


def component_logits(prep: PreparedEstimator, y) -> np.ndarray:
    """All z_i for one observation (L,) or a batch (N, L)."""
    Y, single = _as_batch(prep, y)
    Z = np.empty((Y.shape[0], prep.L))
    for i in range(prep.L):
        V = _whitened_residual(prep, Y, i)
        Z[:, i] = prep.log_const[i] - 0.5 * np.einsum("ij,ij->j", V, V)
    return Z[0] if single else Z


def component_logit(prep: PreparedEstimator, y, i: int) -> float:
    Y, _ = _as_batch(prep, y)
    V = _whitened_residual(prep, Y[:1], i)
    return float(prep.log_const[i] - 0.5 * V[:, 0] @ V[:, 0])


def responsibilities(prep: PreparedEstimator, y) -> np.ndarray:
    """Posterior component probabilities softmax(z)."""
    return softmax(component_logits(prep, y), axis=-1)


def component_mean(prep: PreparedEstimator, y, i: int) -> np.ndarray:
    """Per-component Wiener estimate t_i for one observation or a batch."""
    Y, single = _as_batch(prep, y)
    U = cho_solve((prep.chol[i], True), (Y - prep.Amu[i]).T, check_finite=False)
    T = prep.model.means[i] + (prep.gain[i] @ U).T
    return T[0] if single else T


def estimate(prep: PreparedEstimator, y) -> np.ndarray:
    """R(y) for one observation (m,) or a batch (N, m).

    Components are streamed with a running-max softmax so only one (N, n)
    accumulator is held regardless of L.
    """
    Y, single = _as_batch(prep, y)
    N = Y.shape[0]
    acc = np.zeros((N, prep.n))
    total = np.zeros(N)
    zmax = np.full(N, -np.inf)
    for i in range(prep.L):
        V = _whitened_residual(prep, Y, i)
        z = prep.log_const[i] - 0.5 * np.einsum("ij,ij->j", V, V)
        U = solve_triangular(prep.chol[i], V, lower=True, trans="T", check_finite=False)
        T = prep.model.means[i] + (prep.gain[i] @ U).T
        new_max = np.maximum(zmax, z)
        scale = np.exp(zmax - new_max)
        e = np.exp(z - new_max)
        acc = acc * scale[:, None] + e[:, None] * T
        total = total * scale + e
        zmax = new_max
    R = acc / total[:, None]
    return R[0] if single else R


@dataclass(frozen=True)
class AttentionTensors:
    """Residuals eta, queries Q, keys K (L, m) and values V (L, n).

    ``shift`` is the constant subtracted from every logit so that all
    constants entering a square root are nonnegative; it is 0 whenever every
    l_i >= 0, and softmax is unaffected by it.
    """

    eta: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    shift: float

    def scores(self) -> np.ndarray:
        return np.sum(self.Q * self.K, axis=1)


def inverse_sqrt(S: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Symmetric S^{-1/2}, eigenvalues floored at ``floor * max eigenvalue``."""
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    vals = np.maximum(vals, floor * vals[-1])
    return (vecs / np.sqrt(vals)) @ vecs.T


def build_attention(prep: PreparedEstimator, y) -> AttentionTensors:
    y = np.asarray(y, dtype=float)
    if y.shape != (prep.m,):
        raise ValueError(f"expected a single observation of length {prep.m}")
    m = prep.m
    shift = min(0.0, float(prep.log_const.min()))
    eta = y - prep.Amu
    Q = np.empty((prep.L, m))
    K = np.empty((prep.L, m))
    V = np.empty((prep.L, prep.n))
    for i in range(prep.L):
        M = inverse_sqrt(prep.S(i))
        b = M @ eta[i] / math.sqrt(2.0)
        c = math.sqrt(prep.log_const[i] - shift) / math.sqrt(m)
        Q[i] = c + b
        K[i] = c - b
        V[i] = prep.model.means[i] + prep.gain[i] @ (M @ (M @ eta[i]))
    return AttentionTensors(eta, Q, K, V, shift)


def estimate_attention(prep: PreparedEstimator, y) -> np.ndarray:
    """softmax((Q * K) 1)^T V; agrees with :func:`estimate`."""
    att = build_attention(prep, y)
    return softmax(att.scores()) @ att.V


def _gauss_logpdf(r: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """log N(r; 0, C C^T) for rows of r."""
    V = solve_triangular(chol, r.T, lower=True)
    k = chol.shape[0]
    return -0.5 * np.sum(V * V, axis=0) - np.sum(np.log(np.diag(chol))) - 0.5 * k * LOG_2PI


def posterior_mean_oracle(model: MixtureModel, operator, noise: NoiseModel, y, grid_spec=None) -> np.ndarray:
    """E[x | y] by brute-force quadrature, for n <= 3.

    Each component is integrated over its own support: with Sigma_i = U D U^T
    of rank r, x = mu_i + U D^{1/2} g and g runs over a uniform tensor grid on
    [-half_width, half_width]^r weighted by the standard normal density. Rank-0
    components are point masses. Only densities are evaluated; none of the
    closed-form posterior algebra is used.

    ``grid_spec`` is a dict with ``half_width`` (default 9.0) and ``points``
    (per dimension, default 201). The prior grid must carry mass within 1% of
    one. The integration grid itself is then moved onto the integrand: its
    mode and curvature in g are read off by central differences of the log
    density, and the nodes are placed at g* + C t with C C^T the inverse of
    that curvature. If more than 1e-12 of the weight lands on the outer face,
    the half-width grows by 1.5x, up to 80.
    """
    spec = {"half_width": 9.0, "points": 201}
    spec.update(grid_spec or {})
    A = operator.materialize() if isinstance(operator, ForwardOperator) else np.atleast_2d(np.asarray(operator, float))
    y = np.asarray(y, dtype=float)
    n = model.n
    if n > 3:
        raise ValueError("quadrature oracle supports n <= 3 only")
    noise_chol = np.linalg.cholesky(noise.covariance(A.shape[0]))
    h0 = float(spec["half_width"])
    P = int(spec["points"])

    log_masses = []
    firsts = []
    for i in range(model.L):
        if model.weights[i] == 0:
            continue
        vals, vecs = np.linalg.eigh(model.covariances[i])
        top = max(vals[-1], 0.0)
        keep = vals > 1e-12 * max(top, 1e-300)
        B = vecs[:, keep] * np.sqrt(vals[keep]) if top > 0 else np.zeros((n, 0))
        r = B.shape[1]
        mu = model.means[i]
        if r == 0:
            log_masses.append(math.log(model.weights[i]) + _gauss_logpdf((y - A @ mu)[None], noise_chol)[0])
            firsts.append(mu)
            continue

        nodes = np.linspace(-h0, h0, P)
        step = nodes[1] - nodes[0]
        prior_mass = np.exp(logsumexp(-0.5 * nodes**2) - 0.5 * LOG_2PI + math.log(step)) ** r
        if abs(prior_mass - 1.0) > 0.01:
            raise ValueError(f"quadrature grid too coarse: prior mass {prior_mass:.4f}")

        def logf(g):
            g = np.atleast_2d(g)
            return -0.5 * np.sum(g * g, axis=1) + _gauss_logpdf(y - (mu + g @ B.T) @ A.T, noise_chol)

        # mode and curvature of the integrand from central differences
        E = np.eye(r)
        gs = np.zeros(r)
        for _ in range(2):
            grad = np.array([(logf(gs + e) - logf(gs - e))[0] / 2 for e in E])
            f0 = logf(gs)[0]
            H = np.empty((r, r))
            for j in range(r):
                for k in range(r):
                    H[j, k] = (logf(gs + E[j] + E[k]) - logf(gs + E[j] - E[k])
                               - logf(gs - E[j] + E[k]) + logf(gs - E[j] - E[k]))[0] / 4
            gs = gs - np.linalg.solve(H, grad)
        C = np.linalg.cholesky(np.linalg.inv(-0.5 * (H + H.T)))
        logdet = float(np.sum(np.log(np.diag(C))))

        h = h0
        while True:
            t_nodes = np.linspace(-h, h, P)
            t = np.array(list(itertools.product(t_nodes, repeat=r)))
            g = gs + t @ C.T
            logv = logf(g)
            top_v = logv.max()
            wts = np.exp(logv - top_v)
            edge = np.any(np.abs(t) >= h * (1 - 1e-12), axis=1)
            if wts[edge].sum() <= 1e-12 * wts.sum():
                break
            if h * 1.5 > 80.0:
                raise ValueError("posterior mass reaches the edge of the widest quadrature grid")
            h *= 1.5
        log_step = r * math.log(t_nodes[1] - t_nodes[0])
        log_masses.append(math.log(model.weights[i]) - 0.5 * r * LOG_2PI + logdet + log_step
                          + top_v + math.log(wts.sum()))
        firsts.append(mu + ((wts @ g) / wts.sum()) @ B.T)
    log_masses = np.array(log_masses)
    post = softmax(log_masses)
    return post @ np.array(firsts)
