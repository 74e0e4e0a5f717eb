import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixbayes import _kernels_py, kernels

compiled = pytest.importorskip("mixbayes._kernels")


def _gram(rng, d):
    D = rng.standard_normal((d + 3, d))
    D /= np.linalg.norm(D, axis=0)
    return D.T @ D


def test_backend_is_reported():
    assert kernels.BACKEND in ("compiled", "python")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(1, 8), N=st.integers(1, 5), lam=st.floats(0.0, 2.0))
def test_lasso_cd_backends_agree(seed, d, N, lam):
    rng = np.random.default_rng(seed)
    G = _gram(rng, d)
    C = rng.standard_normal((N, d))
    b0 = np.zeros((N, d))
    b1, _, c1 = compiled.lasso_cd(G, C, lam, b0, 1e-10, 100000)
    b2, _, c2 = _kernels_py.lasso_cd(G, C, lam, b0, 1e-10, 100000)
    assert np.all(c1) and np.all(c2)
    # both converged to the unique minimizer of a strictly convex problem
    np.testing.assert_allclose(b1, b2, atol=1e-7)


def test_lasso_cd_respects_sweep_cap():
    rng = np.random.default_rng(0)
    G = _gram(rng, 6)
    C = rng.standard_normal((2, 6))
    for impl in (compiled, _kernels_py):
        _, sweeps, conv = impl.lasso_cd(G, C, 1e-4, np.zeros((2, 6)), 1e-15, 1)
        assert sweeps <= 1 and not np.all(conv)


def test_lasso_cd_warm_start_at_solution_uses_no_sweeps():
    G = np.eye(3)
    C = np.array([[2.0, -0.1, 0.5]])
    sol = np.array([[1.5, 0.0, 0.0]])
    for impl in (compiled, _kernels_py):
        b, sweeps, conv = impl.lasso_cd(G, C, 0.5, sol, 1e-12, 10)
        assert sweeps == 0 and conv[0]
        np.testing.assert_array_equal(b, sol)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    p=st.integers(1, 7),
    N=st.integers(1, 4),
    tau=st.floats(1e-3, 5.0),
    zeros=st.integers(0, 3),
)
def test_weighted_prox_backends_agree(seed, p, N, tau, zeros):
    rng = np.random.default_rng(seed)
    k = rng.uniform(0.05, 3.0, p)
    k[: min(zeros, p)] = 0.0
    c = 2 * rng.standard_normal((N, p))
    a = compiled.weighted_l2_prox(c, k, tau)
    b = _kernels_py.weighted_l2_prox(c, k, tau)
    np.testing.assert_allclose(a, b, atol=1e-10, rtol=1e-9)


def test_weighted_prox_accepts_per_row_tau():
    rng = np.random.default_rng(1)
    c = rng.standard_normal((3, 4))
    k = np.array([1.0, 2.0, 0.5, 0.0])
    tau = np.array([0.1, 1.0, 10.0])
    for impl in (compiled, _kernels_py):
        out = impl.weighted_l2_prox(c, k, tau)
        for i in range(3):
            np.testing.assert_allclose(out[i], impl.weighted_l2_prox(c[i : i + 1], k, tau[i])[0], atol=1e-13)


def test_weighted_prox_root_is_accurate():
    # smooth branch: |K^{1/2}-weighted residual| equals tau at the root
    rng = np.random.default_rng(2)
    k = rng.uniform(0.2, 2.0, 5)
    c = 3 * rng.standard_normal((4, 5))
    tau = 0.7
    for impl in (compiled, _kernels_py):
        x = impl.weighted_l2_prox(c, k, tau)
        # stationarity c - x = tau k^2 x / |k x|
        nrm = np.linalg.norm(k * x, axis=1, keepdims=True)
        np.testing.assert_allclose(c - x, tau * k**2 * x / nrm, atol=1e-9)
