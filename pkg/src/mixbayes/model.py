"""Gaussian-mixture signal model, forward operators and Gaussian noise."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "MixtureModel",
    "ForwardOperator",
    "NoiseModel",
    "apply_forward",
    "sample_mixture",
    "sample_noise",
    "mixture_from_coordinate_supports",
    "blur_kernel",
    "psd_factor",
]


def psd_factor(cov: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Return B with ``B @ B.T == cov`` using the eigendecomposition.

    Eigenvalues below ``rtol * max(eig)`` are treated as zero and their
    directions dropped, so B has as many columns as the numerical rank.
    """
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    top = vals[-1] if vals.size else 0.0
    if top <= 0:
        return np.zeros((cov.shape[0], 0))
    keep = vals > rtol * top
    return vecs[:, keep] * np.sqrt(vals[keep])


@dataclass(frozen=True)
class MixtureModel:
    """L-component Gaussian mixture in R^n.

    ``covariances`` has shape (L, n, n). ``factors`` optionally stores the same
    covariances as a list of n x r_i matrices B_i with Sigma_i = B_i B_i^T.
    Use :meth:`from_factors` to build a model from factors only.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    factors: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float)
        if cov.ndim == 2:
            cov = cov[None]
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        L, n = mu.shape
        if w.shape != (L,) or cov.shape != (L, n, n):
            raise ValueError(
                f"inconsistent shapes: weights {w.shape}, means {mu.shape}, covariances {cov.shape}"
            )
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        for i in range(L):
            S = cov[i]
            if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.abs(S).max(initial=0.0)):
                raise ValueError(f"covariance {i} is not symmetric")
            delta = 1e-12 * max(np.trace(S), 1.0) / n
            try:
                np.linalg.cholesky(S + delta * np.eye(n))
            except np.linalg.LinAlgError:
                raise ValueError(f"covariance {i} is not positive semidefinite") from None
        if self.factors is not None:
            facs = tuple(np.asarray(B, dtype=float).reshape(n, -1) for B in self.factors)
            if len(facs) != L:
                raise ValueError("need one factor per component")
            for i, B in enumerate(facs):
                ref = np.linalg.norm(cov[i])
                err = np.linalg.norm(B @ B.T - cov[i])
                if err > 1e-10 * max(ref, 1.0):
                    raise ValueError(f"factor {i} does not reproduce its covariance")
            object.__setattr__(self, "factors", facs)

    @classmethod
    def from_factors(cls, weights, means, factors) -> "MixtureModel":
        facs = [np.atleast_2d(np.asarray(B, dtype=float)) for B in factors]
        cov = np.stack([B @ B.T for B in facs])
        return cls(weights, means, cov, factors=tuple(facs))

    @property
    def L(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.means.shape[1]

    @property
    def sparsity(self) -> int:
        """Largest covariance rank across components."""
        return max(int(np.linalg.matrix_rank(S)) for S in self.covariances)

    def factor(self, i: int) -> np.ndarray:
        if self.factors is not None:
            return self.factors[i]
        return psd_factor(self.covariances[i])


@dataclass(frozen=True)
class ForwardOperator:
    """Linear forward map: an explicit matrix or a circular Gaussian blur."""

    kind: str
    matrix: Optional[np.ndarray] = None
    n: Optional[int] = None
    sigma_b: Optional[float] = None
    radius: Optional[int] = None

    @classmethod
    def dense(cls, matrix) -> "ForwardOperator":
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls("dense", matrix=A, n=A.shape[1])

    @classmethod
    def identity(cls, n: int) -> "ForwardOperator":
        return cls.dense(np.eye(n))

    @classmethod
    def gaussian_blur(cls, n: int, sigma_b: float, radius: Optional[int] = None) -> "ForwardOperator":
        if sigma_b <= 0:
            raise ValueError("sigma_b must be positive")
        if radius is None:
            radius = int(math.ceil(4 * sigma_b))
        radius = int(max(0, min(radius, n // 2 - 1)))
        return cls("gaussian_blur", n=int(n), sigma_b=float(sigma_b), radius=radius)

    @property
    def shape(self) -> tuple:
        if self.kind == "dense":
            return self.matrix.shape
        return (self.n, self.n)

    def kernel(self) -> np.ndarray:
        return blur_kernel(self.sigma_b, self.radius)

    def materialize(self) -> np.ndarray:
        if self.kind == "dense":
            return self.matrix
        q = self.kernel()
        A = np.zeros((self.n, self.n))
        for k in range(-self.radius, self.radius + 1):
            idx = np.arange(self.n)
            A[idx, (idx + k) % self.n] += q[k + self.radius]
        return A

    def to_dict(self) -> dict:
        if self.kind == "dense":
            return {"kind": "dense", "shape": list(self.matrix.shape)}
        return {"kind": "gaussian_blur", "n": self.n, "sigma_b": self.sigma_b, "radius": self.radius}


def blur_kernel(sigma_b: float, radius: int) -> np.ndarray:
    """Taps q[-radius..radius] of a sampled Gaussian, normalized to sum 1."""
    k = np.arange(-radius, radius + 1, dtype=float)
    q = np.exp(-(k**2) / (2.0 * sigma_b**2))
    return q / q.sum()


def apply_forward(op: ForwardOperator, x: np.ndarray) -> np.ndarray:
    """Compute ``A x`` for a single signal (n,) or a batch (N, n)."""
    x = np.asarray(x, dtype=float)
    m, n = op.shape
    if x.shape[-1] != n:
        raise ValueError(f"signal length {x.shape[-1]} does not match operator input dimension {n}")
    if op.kind == "dense":
        return x @ op.matrix.T
    q = op.kernel()
    out = np.zeros_like(x)
    # (Ax)[j] = sum_k q[k] x[j + k] (circular); q is symmetric
    for k in range(-op.radius, op.radius + 1):
        out += q[k + op.radius] * np.roll(x, -k, axis=-1)
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian noise, isotropic (sigma) or with full covariance."""

    kind: str
    sigma: Optional[float] = None
    cov: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "iso":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("noise standard deviation must be positive (covariance must be invertible)")
        elif self.kind == "full":
            C = np.atleast_2d(np.asarray(self.cov, dtype=float))
            try:
                np.linalg.cholesky(C)
            except np.linalg.LinAlgError:
                raise ValueError("noise covariance must be symmetric positive definite") from None
            object.__setattr__(self, "cov", C)
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def iso(cls, sigma: float) -> "NoiseModel":
        return cls("iso", sigma=float(sigma))

    @classmethod
    def full(cls, cov) -> "NoiseModel":
        return cls("full", cov=cov)

    def covariance(self, m: int) -> np.ndarray:
        if self.kind == "iso":
            return self.sigma**2 * np.eye(m)
        if self.cov.shape != (m, m):
            raise ValueError(f"noise covariance is {self.cov.shape}, expected {(m, m)}")
        return self.cov


def sample_mixture(model: MixtureModel, rng: np.random.Generator, count: int):
    """Draw ``count`` signals; returns (signals (count, n), labels (count,)).

    Labels are 0-based component indices.
    """
    labels = rng.choice(model.L, size=count, p=model.weights)
    X = np.empty((count, model.n))
    for i in range(model.L):
        idx = np.flatnonzero(labels == i)
        if idx.size == 0:
            continue
        B = model.factor(i)
        g = rng.standard_normal((idx.size, B.shape[1]))
        X[idx] = model.means[i] + g @ B.T
    return X, labels


def sample_noise(noise: NoiseModel, rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    if noise.kind == "iso":
        return noise.sigma * rng.standard_normal((count, m))
    C = np.linalg.cholesky(noise.covariance(m))
    return rng.standard_normal((count, m)) @ C.T


def mixture_from_coordinate_supports(n: int, s: int, L: int, supports: Sequence[Sequence[int]]) -> MixtureModel:
    """Uniform mixture of zero-mean Gaussians, each living on s coordinates.

    ``supports`` holds 0-based coordinate indices.
    """
    if len(supports) != L:
        raise ValueError(f"expected {L} supports, got {len(supports)}")
    cov = np.zeros((L, n, n))
    factors = []
    for i, sup in enumerate(supports):
        sup = [int(k) for k in sup]
        if len(sup) != s:
            raise ValueError(f"support {i} has size {len(sup)}, expected {s}")
        if len(set(sup)) != s:
            raise ValueError(f"support {i} has duplicate indices")
        if min(sup) < 0 or max(sup) >= n:
            raise ValueError(f"support {i} has indices outside 0..{n - 1}")
        cov[i, sup, sup] = 1.0
        B = np.zeros((n, s))
        B[sup, np.arange(s)] = 1.0
        factors.append(B)
    return MixtureModel(np.full(L, 1.0 / L), np.zeros((L, n)), cov, factors=tuple(factors))
