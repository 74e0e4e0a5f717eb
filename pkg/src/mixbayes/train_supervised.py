"""Supervised fit: minimize the empirical reconstruction risk of the estimator.

Parameters are (alpha, means, factors) with w = softmax(alpha) and
Sigma_i = B_i B_i^T, so every iterate is a valid mixture. The gradient is
derived by hand through the softmax responsibilities and the Cholesky solves;
``tests/test_train_supervised.py`` checks it against finite differences.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp, softmax

from .estimator import LOG_2PI
from .model import ForwardOperator, MixtureModel, NoiseModel, psd_factor
from .rng import make_rng

__all__ = [
    "TrainableParams",
    "TrainConfig",
    "empirical_risk",
    "regularizer",
    "grad",
    "train",
    "TrainResult",
]

log = logging.getLogger(__name__)


@dataclass
class TrainableParams:
    alpha: np.ndarray  # (L,)
    means: np.ndarray  # (L, n)
    factors: np.ndarray  # (L, n, r)

    @property
    def L(self) -> int:
        return self.alpha.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return softmax(self.alpha)

    def covariances(self) -> np.ndarray:
        return np.einsum("lir,ljr->lij", self.factors, self.factors)

    def to_model(self) -> MixtureModel:
        return MixtureModel.from_factors(self.weights, self.means, list(self.factors))

    def copy(self) -> "TrainableParams":
        return TrainableParams(self.alpha.copy(), self.means.copy(), self.factors.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.alpha.ravel(), self.means.ravel(), self.factors.ravel()])

    def unflat(self, v) -> "TrainableParams":
        a, m = self.alpha.size, self.means.size
        return TrainableParams(
            v[:a].reshape(self.alpha.shape).copy(),
            v[a : a + m].reshape(self.means.shape).copy(),
            v[a + m :].reshape(self.factors.shape).copy(),
        )

    @classmethod
    def from_model(cls, model: MixtureModel, rank: int, seed: int = 0, jitter: float = 1e-3):
        """Factor each covariance to rank ``rank``.

        Missing columns (covariance rank below ``rank``) get small random
        entries: an all-zero column is a stationary point and would never move.
        """
        L, n = model.L, model.n
        F = np.zeros((L, n, rank))
        rng = make_rng(seed, "factor-jitter")
        for i in range(L):
            B = psd_factor(model.covariances[i])
            B = B[:, ::-1][:, :rank]  # largest eigenvalues first
            F[i, :, : B.shape[1]] = B
            if B.shape[1] < rank:
                scale = jitter * math.sqrt(max(np.trace(model.covariances[i]) / n, 1e-12))
                F[i, :, B.shape[1] :] = scale * rng.standard_normal((n, rank - B.shape[1]))
        with np.errstate(divide="ignore"):
            alpha = np.log(np.maximum(model.weights, 1e-300))
        return cls(alpha - alpha.max(), model.means.copy(), F)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    regularizer: str = "none"
    reg_lambda: float = 0.0
    clamp: float = math.inf
    rank: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.regularizer not in ("none", "nuclear", "frobenius"):
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.reg_lambda < 0 or not self.clamp > 0:
            raise ValueError("reg_lambda must be >= 0 and clamp > 0")


def _dense(operator):
    return operator.materialize() if isinstance(operator, ForwardOperator) else np.atleast_2d(np.asarray(operator, float))


class _CovSolver:
    """Solves with S = G G^T + Sigma_E and its log-determinant.

    With isotropic noise and r < m, Woodbury reduces everything to an r x r
    Cholesky; otherwise S is factored directly.
    """

    def __init__(self, G, SE, sigma2=None):
        m, r = G.shape
        self.G = G
        if sigma2 is not None and r < m:
            self.sigma2 = sigma2
            self.C = np.linalg.cholesky(sigma2 * np.eye(r) + G.T @ G)
            self.logdet = (m - r) * math.log(sigma2) + 2.0 * np.sum(np.log(np.diag(self.C)))
            self.lowrank = True
        else:
            S = G @ G.T + SE
            self.C = np.linalg.cholesky(0.5 * (S + S.T))
            self.logdet = 2.0 * np.sum(np.log(np.diag(self.C)))
            self.lowrank = False

    def solve(self, M):
        if self.lowrank:
            inner = cho_solve((self.C, True), self.G.T @ M, check_finite=False)
            return (M - self.G @ inner) / self.sigma2
        return cho_solve((self.C, True), M, check_finite=False)


def _forward(params: TrainableParams, A, noise: NoiseModel, Y, keep=False):
    """Estimator outputs for rows of Y; optionally keep intermediates for backprop."""
    L = params.L
    N = Y.shape[0]
    m, n = A.shape
    SE = noise.covariance(m)
    sigma2 = noise.sigma**2 if noise.kind == "iso" else None
    lse = logsumexp(params.alpha)
    Z = np.empty((N, L))
    T = np.empty((L, N, n))
    cache = []
    for i in range(L):
        B = params.factors[i]
        G = A @ B
        cs = _CovSolver(G, SE, sigma2)
        H = Y - A @ params.means[i]
        U = cs.solve(H.T)
        Z[:, i] = params.alpha[i] - lse - 0.5 * (n * LOG_2PI + cs.logdet) - 0.5 * np.einsum("ij,ji->i", H, U)
        P = G.T @ U
        T[i] = params.means[i] + (B @ P).T
        if keep:
            cache.append((B, G, cs, U, P))
    W = softmax(Z, axis=1)
    R = np.einsum("nl,lnd->nd", W, T)
    return R, W, T, cache


def empirical_risk(params: TrainableParams, operator, noise: NoiseModel, X, Y) -> float:
    """Mean over the batch of |x_j - R(y_j)|^2."""
    A = _dense(operator)
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    R, *_ = _forward(params, A, noise, Y)
    return float(np.mean(np.sum((X - R) ** 2, axis=1)))


def _range_projector_times(B):
    """P B with P the orthogonal projector onto range(B B^T), via eigh(B^T B)."""
    vals, Q = np.linalg.eigh(B.T @ B)
    top = vals[-1] if vals.size else 0.0
    Qp = Q[:, vals > 1e-12 * max(top, 1e-300)]
    return B @ Qp @ Qp.T


def regularizer(params: TrainableParams, kind: str, with_grad: bool = False):
    """Sum over components of |Sigma_i|_* or |Sigma_i|_F^2 (0 for 'none')."""
    F = params.factors
    if kind == "none":
        val, g = 0.0, np.zeros_like(F)
    elif kind == "nuclear":
        val = 0.0
        g = np.empty_like(F)
        for i, B in enumerate(F):
            sv = np.linalg.svd(B, compute_uv=False)
            val += float(np.sum(sv**2))
            g[i] = 2.0 * _range_projector_times(B)
    elif kind == "frobenius":
        BtB = np.einsum("lir,lis->lrs", F, F)
        val = float(np.sum(BtB * BtB))
        g = 4.0 * np.einsum("lir,lrs->lis", F, BtB)
    else:
        raise ValueError(f"unknown regularizer {kind!r}")
    return (val, g) if with_grad else val


def grad(params: TrainableParams, operator, noise: NoiseModel, X, Y, reg: str = "none", reg_lambda: float = 0.0):
    """Value and gradient of empirical_risk + reg_lambda * regularizer.

    Returns ``(value, TrainableParams)`` holding the gradient.
    """
    A = _dense(operator)
    X = np.atleast_2d(np.asarray(X, float))
    Y = np.atleast_2d(np.asarray(Y, float))
    N = X.shape[0]
    R, W, T, cache = _forward(params, A, noise, Y, keep=True)
    E = X - R
    risk = float(np.mean(np.sum(E * E, axis=1)))
    gR = -2.0 * E / N
    gW = np.einsum("lnd,nd->nl", T, gR)
    gZ = W * (gW - np.sum(W * gW, axis=1, keepdims=True))
    g_alpha_direct = gZ.sum(axis=0)
    w = params.weights
    g_alpha = g_alpha_direct - w * g_alpha_direct.sum()
    g_means = np.empty_like(params.means)
    g_factors = np.empty_like(params.factors)
    for i, (B, G, cs, U, P) in enumerate(cache):
        gz = gZ[:, i]
        gt = W[:, i : i + 1] * gR  # (N, n)
        gtB = gt @ B  # (N, r)
        V = cs.solve(G @ gtB.T)  # S^{-1} G B^T gt, (m, N)
        g_eta = V - U * gz  # (m, N)
        g_means[i] = gt.sum(axis=0) - A.T @ g_eta.sum(axis=1)
        SinvG = cs.solve(G)
        UtG = U.T @ G  # (N, r)
        VtG = V.T @ G
        # (g_S + g_S^T) G with g_S = -1/2 sum(gz) S^{-1} + 1/2 U diag(gz) U^T - V U^T
        gSG = -gz.sum() * SinvG + U @ (gz[:, None] * UtG) - V @ UtG - U @ VtG
        g_G = gSG + U @ gtB
        g_factors[i] = gt.T @ P.T + A.T @ g_G
    value = risk
    if reg != "none" and reg_lambda:
        rv, rg = regularizer(params, reg, with_grad=True)
        value += reg_lambda * rv
        g_factors += reg_lambda * rg
    return value, TrainableParams(g_alpha, g_means, g_factors)


@dataclass
class TrainResult:
    model: MixtureModel
    params: TrainableParams
    history: list  # (epoch, train_risk, reg_term)

    def history_csv(self) -> str:
        lines = ["epoch,train_risk,reg_term"]
        lines += [f"{e},{r!r},{g!r}" for e, r, g in self.history]
        return "\n".join(lines) + "\n"


def _clip(params: TrainableParams, bound: float):
    if not math.isfinite(bound):
        return
    r = params.factors.shape[2]
    np.clip(params.means, -bound, bound, out=params.means)
    # |(B B^T)_kl| <= r * max|B|^2, so this keeps every covariance entry within bound
    fb = math.sqrt(bound / max(r, 1))
    np.clip(params.factors, -fb, fb, out=params.factors)
    np.clip(params.alpha, -bound, bound, out=params.alpha)


def initial_params(X, L: int, rank: int, seed: int = 0, init_model: Optional[MixtureModel] = None) -> TrainableParams:
    """Start from ``init_model`` when given, else k-means means and scaled-identity factors."""
    if init_model is not None:
        return TrainableParams.from_model(init_model, rank, seed)
    from .train_unsupervised import kmeans

    labels, centers = kmeans(X, L, restarts=10, seed=seed)
    n = X.shape[1]
    scale = math.sqrt(max(np.mean(np.var(X, axis=0)), 1e-12))
    F = np.zeros((L, n, rank))
    F[:, np.arange(rank), np.arange(rank)] = scale
    rng = make_rng(seed, "factor-jitter")
    F += 1e-3 * scale * rng.standard_normal(F.shape)
    return TrainableParams(np.zeros(L), centers.copy(), F)


def train(trainset, operator, noise: NoiseModel, config: TrainConfig, L: Optional[int] = None,
          init: Optional[MixtureModel] = None) -> TrainResult:
    """Mini-batch Adam/SGD on the empirical risk.

    ``trainset`` is a pair (X, Y) of clean signals and observations. Either
    ``init`` (a starting mixture) or ``L`` must be given.
    """
    X, Y = (np.atleast_2d(np.asarray(a, float)) for a in trainset)
    A = _dense(operator)
    N, n = X.shape
    rank = config.rank or min(n, 32)
    if rank > n:
        raise ValueError("factor rank cannot exceed the signal dimension")
    if init is None and L is None:
        raise ValueError("give either an initial model or the component count")
    params = initial_params(X, L or init.L, rank, config.seed, init)
    if config.lr == 0:
        return TrainResult(params.to_model(), params, [])
    theta = params.flat()
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    b1, b2 = config.betas
    step = 0
    history = []
    for epoch in range(config.epochs):
        order = make_rng(config.seed, "shuffle", epoch).permutation(N)
        risks = []
        for start in range(0, N, config.batch_size):
            idx = order[start : start + config.batch_size]
            p = params.unflat(theta)
            val, g = grad(p, A, noise, X[idx], Y[idx], config.regularizer, config.reg_lambda)
            if not np.isfinite(val):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, step {step} (lr={config.lr}); training diverged"
                )
            risks.append(val)
            gv = g.flat()
            step += 1
            if config.optimizer == "adam":
                m1 = b1 * m1 + (1 - b1) * gv
                m2 = b2 * m2 + (1 - b2) * gv * gv
                theta = theta - config.lr * (m1 / (1 - b1**step)) / (np.sqrt(m2 / (1 - b2**step)) + config.eps)
            else:
                theta = theta - config.lr * gv
            if math.isfinite(config.clamp):
                p = params.unflat(theta)
                _clip(p, config.clamp)
                theta = p.flat()
        params = params.unflat(theta)
        reg_val = regularizer(params, config.regularizer) if config.regularizer != "none" else 0.0
        history.append((epoch, float(np.mean(risks)), float(reg_val)))
    return TrainResult(params.to_model(), params, history)
