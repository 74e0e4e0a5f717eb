import math

import mpmath
import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from mixbayes.estimator import (
    build_attention,
    component_logit,
    component_logits,
    component_mean,
    estimate,
    estimate_attention,
    inverse_sqrt,
    posterior_mean_oracle,
    prepare,
    responsibilities,
)
from mixbayes.model import MixtureModel, NoiseModel

from conftest import random_model, random_noise


def _wiener(mu, cov, A, SE, y):
    """Independent affine estimator via an explicit (pseudo)inverse."""
    S = A @ cov @ A.T + SE
    return mu + cov @ A.T @ np.linalg.inv(S) @ (y - A @ mu)


def test_prepare_identity_algebra():
    model = MixtureModel([1.0], np.zeros((1, 3)), np.zeros((1, 3, 3)))
    prep = prepare(model, np.eye(3), NoiseModel.iso(1.0))
    np.testing.assert_array_equal(prep.chol[0], np.eye(3))
    assert prep.logdet(0) == 0.0


def test_prepare_drops_zero_weight():
    model = MixtureModel([1.0, 0.0], np.zeros((2, 2)), np.stack([np.eye(2)] * 2))
    assert prepare(model, np.eye(2), NoiseModel.iso(1.0)).L == 1


def test_prepare_cholesky_reconstructs(rng):
    model = random_model(rng, 4, 3)
    A = rng.standard_normal((5, 4))
    noise = random_noise(rng, 5, full=True)
    prep = prepare(model, A, noise)
    for i in range(3):
        S = A @ model.covariances[i] @ A.T + noise.covariance(5)
        assert np.linalg.norm(prep.S(i) - S) <= 1e-10 * np.linalg.norm(S)


def test_logit_zero_residual_and_scalar_density():
    model = MixtureModel([1.0], np.zeros((1, 1)), np.zeros((1, 1, 1)))
    prep = prepare(model, np.eye(1), NoiseModel.iso(1.0))
    assert component_logit(prep, np.zeros(1), 0) == pytest.approx(prep.log_const[0])
    y = 0.7
    assert component_logit(prep, np.array([y]), 0) == pytest.approx(math.log(1 / math.sqrt(2 * math.pi)) - y * y / 2)


def test_logit_matches_extended_precision_oracle(rng):
    mpmath.mp.dps = 40
    for _ in range(5):
        n, m = 3, 4
        model = random_model(rng, n, 2)
        A = rng.standard_normal((m, n))
        noise = random_noise(rng, m, full=True)
        prep = prepare(model, A, noise)
        y = rng.standard_normal(m)
        for i in range(2):
            S = mpmath.matrix((A @ model.covariances[i] @ A.T + noise.covariance(m)).tolist())
            r = mpmath.matrix((y - A @ model.means[i]).tolist())
            quad = (r.T * mpmath.inverse(S) * r)[0]
            c = mpmath.mpf(model.weights[i]) / mpmath.sqrt((2 * mpmath.pi) ** n * mpmath.det(S)) * mpmath.exp(-quad / 2)
            got = math.exp(component_logit(prep, y, i))
            assert abs(got - float(c)) <= 1e-10 * float(c)


def test_responsibilities_symmetry_and_arithmetic():
    model = MixtureModel([0.5, 0.5], np.zeros((2, 2)), np.stack([np.eye(2)] * 2))
    prep = prepare(model, np.eye(2), NoiseModel.iso(0.5))
    np.testing.assert_allclose(responsibilities(prep, np.array([0.3, -2.0])), [0.5, 0.5], atol=1e-15)
    # logit difference of log 3 from the weights alone
    model = MixtureModel([0.25, 0.75], np.zeros((2, 1)), np.zeros((2, 1, 1)))
    prep = prepare(model, np.eye(1), NoiseModel.iso(1.0))
    np.testing.assert_allclose(responsibilities(prep, np.array([0.4])), [0.25, 0.75], atol=1e-14)


def test_responsibilities_are_simplex_for_extreme_inputs(rng):
    model = random_model(rng, 3, 4, ranks=[1, 2, 3, 0])
    prep = prepare(model, np.eye(3), NoiseModel.iso(0.1))
    for scale in (1e-3, 1.0, 1e3, 1e6):
        W = responsibilities(prep, scale * rng.standard_normal((20, 3)))
        assert np.all(np.isfinite(W)) and np.all(W >= 0)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
        Z = component_logits(prep, scale * rng.standard_normal((20, 3)))
        assert np.all(np.isfinite(Z))


def test_component_mean_special_cases(rng):
    model = MixtureModel([1.0], np.zeros((1, 2)), np.eye(2)[None])
    prep = prepare(model, np.eye(2), NoiseModel.iso(1.0))
    y = rng.standard_normal(2)
    np.testing.assert_allclose(component_mean(prep, y, 0), y / 2, atol=1e-15)
    model = random_model(rng, 4, 2, ranks=[1, 2])
    A = rng.standard_normal((4, 4))
    prep = prepare(model, A, NoiseModel.iso(0.3))
    for i in range(2):
        np.testing.assert_allclose(component_mean(prep, A @ model.means[i], i), model.means[i], atol=1e-12)
        t = component_mean(prep, rng.standard_normal(4), i) - model.means[i]
        U, s, _ = np.linalg.svd(model.covariances[i])
        Ur = U[:, s > 1e-10]
        assert np.linalg.norm(t - Ur @ (Ur.T @ t)) < 1e-10


def test_single_component_equals_wiener(rng):
    for full in (False, True):
        model = random_model(rng, 5, 1, ranks=[3])
        A = rng.standard_normal((4, 5))
        noise = random_noise(rng, 4, full=full)
        prep = prepare(model, A, noise)
        y = rng.standard_normal(4)
        ref = _wiener(model.means[0], model.covariances[0], A, noise.covariance(4), y)
        np.testing.assert_allclose(estimate(prep, y), ref, atol=1e-10)
        np.testing.assert_allclose(estimate(prep, y), component_mean(prep, y, 0), atol=1e-13)


def test_estimate_in_convex_hull(rng):
    model = random_model(rng, 3, 3)
    prep = prepare(model, np.eye(3), NoiseModel.iso(0.5))
    y = rng.standard_normal(3)
    T = np.stack([component_mean(prep, y, i) for i in range(3)])
    R = estimate(prep, y)
    assert np.all(R >= T.min(axis=0) - 1e-12) and np.all(R <= T.max(axis=0) + 1e-12)


def test_batch_matches_single(rng):
    model = random_model(rng, 3, 3)
    prep = prepare(model, rng.standard_normal((3, 3)), NoiseModel.iso(0.5))
    Y = rng.standard_normal((6, 3))
    np.testing.assert_allclose(estimate(prep, Y), np.stack([estimate(prep, y) for y in Y]), atol=1e-14)


def test_documented_two_component_example():
    model = MixtureModel([0.5, 0.5], [[1.0, 0.0], [-1.0, 0.0]], np.stack([np.diag([0.5, 0.1])] * 2))
    noise = NoiseModel.iso(math.sqrt(0.2))
    y = np.array([0.8, 0.1])
    prep = prepare(model, np.eye(2), noise)
    ref = posterior_mean_oracle(model, np.eye(2), noise, y)
    np.testing.assert_allclose(estimate(prep, y), ref, rtol=1e-3, atol=1e-6)


def test_oracle_matches_closed_form_single_full_rank(rng):
    model = random_model(rng, 2, 1, ranks=[2])
    A = rng.standard_normal((2, 2))
    noise = NoiseModel.iso(0.7)
    y = rng.standard_normal(2)
    ref = _wiener(model.means[0], model.covariances[0], A, noise.covariance(2), y)
    np.testing.assert_allclose(posterior_mean_oracle(model, A, noise, y), ref, rtol=1e-6, atol=1e-8)


def test_oracle_symmetry_axis():
    model = MixtureModel([0.5, 0.5], [[1.0, 0.0], [-1.0, 0.0]], np.stack([np.diag([0.3, 0.2])] * 2))
    out = posterior_mean_oracle(model, np.eye(2), NoiseModel.iso(0.5), np.array([0.0, 0.4]))
    assert abs(out[0]) < 1e-12


def test_oracle_grid_convergence(rng):
    model = random_model(rng, 2, 2, ranks=[2, 1])
    noise = NoiseModel.iso(0.5)
    y = rng.standard_normal(2)
    fine = posterior_mean_oracle(model, np.eye(2), noise, y, {"points": 201})
    half = posterior_mean_oracle(model, np.eye(2), noise, y, {"points": 401})
    assert np.abs(fine - half).max() < 1e-4


def test_oracle_rejects_coarse_grid(rng):
    model = random_model(rng, 2, 1, ranks=[2])
    with pytest.raises(ValueError):
        posterior_mean_oracle(model, np.eye(2), NoiseModel.iso(0.5), np.zeros(2), {"half_width": 1.0})


def test_oracle_rejects_large_n(rng):
    with pytest.raises(ValueError):
        posterior_mean_oracle(random_model(rng, 4, 1), np.eye(4), NoiseModel.iso(1.0), np.zeros(4))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(1, 3))
@example(seed=23315, L=1)  # posterior far out along a thin prior direction
@example(seed=640, L=1)  # posterior much narrower than the prior
def test_estimate_matches_quadrature_oracle(seed, L):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 2, L)
    A = rng.standard_normal((2, 2)) + 2 * np.eye(2)
    noise = NoiseModel.iso(float(rng.uniform(0.3, 1.0)))
    y = A @ rng.standard_normal(2) + rng.standard_normal(2) * noise.sigma
    got = estimate(prepare(model, A, noise), y)
    ref = posterior_mean_oracle(model, A, noise, y)
    assert np.linalg.norm(got - ref) <= 1e-3 * max(np.linalg.norm(ref), 1.0)


def test_inverse_sqrt_squares_to_inverse(rng):
    B = rng.standard_normal((5, 5))
    S = B @ B.T + np.eye(5)
    M = inverse_sqrt(S)
    np.testing.assert_allclose(M @ M, np.linalg.inv(S), atol=1e-8)


def test_attention_row_sums_reproduce_logits(rng):
    # large variance and small n keep every l_i >= 0, so no shift is applied
    model = MixtureModel([0.5, 0.5], rng.standard_normal((2, 1)), np.full((2, 1, 1), 1e-4))
    prep = prepare(model, np.eye(1), NoiseModel.iso(1e-3))
    assert np.all(prep.log_const >= 0)
    y = rng.standard_normal(1) * 0.01
    att = build_attention(prep, y)
    assert att.shift == 0.0
    np.testing.assert_allclose(att.scores(), component_logits(prep, y), rtol=1e-8)
    c = np.sqrt(prep.log_const) / np.sqrt(prep.m)
    np.testing.assert_allclose(att.Q + att.K, 2 * c[:, None] * np.ones((2, 1)), atol=1e-12)


def test_attention_negative_constants_shift(rng):
    model = random_model(rng, 4, 3)
    prep = prepare(model, np.eye(4), NoiseModel.iso(2.0))
    assert np.all(prep.log_const < 0)
    y = rng.standard_normal(4)
    att = build_attention(prep, y)
    np.testing.assert_allclose(att.scores() + att.shift, component_logits(prep, y), rtol=1e-10, atol=1e-10)


def test_attention_zero_residual_gives_equal_rows(rng):
    model = MixtureModel([1.0], rng.standard_normal((1, 3)), np.eye(3)[None])
    prep = prepare(model, np.eye(3), NoiseModel.iso(0.5))
    att = build_attention(prep, model.means[0])
    np.testing.assert_allclose(att.Q, att.K, atol=1e-14)
    np.testing.assert_allclose(estimate_attention(prep, model.means[0]), att.V[0], atol=1e-14)


def test_attention_equals_direct_with_degenerate_components(rng):
    model = random_model(rng, 4, 3, ranks=[0, 1, 4])
    A = rng.standard_normal((3, 4))
    prep = prepare(model, A, random_noise(rng, 3, full=True))
    for _ in range(10):
        y = rng.standard_normal(3) * 3
        ref = estimate(prep, y)
        assert np.linalg.norm(estimate_attention(prep, y) - ref) <= 1e-8 * max(np.linalg.norm(ref), 1e-300)


def test_estimate_is_locally_lipschitz(rng):
    model = random_model(rng, 3, 3)
    prep = prepare(model, np.eye(3), NoiseModel.iso(0.4))
    y = rng.standard_normal(3)
    base = estimate(prep, y)
    for h in (1e-3, 1e-5, 1e-7):
        d = rng.standard_normal(3)
        d *= h / np.linalg.norm(d)
        assert np.linalg.norm(estimate(prep, y + d) - base) <= 100 * h
