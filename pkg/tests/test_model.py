import numpy as np
import pytest

from mixbayes.model import (
    ForwardOperator,
    MixtureModel,
    NoiseModel,
    apply_forward,
    mixture_from_coordinate_supports,
    sample_mixture,
    sample_noise,
)
from mixbayes.rng import make_rng


def test_identity_operator_is_noop(rng):
    x = rng.standard_normal(7)
    assert np.array_equal(apply_forward(ForwardOperator.identity(7), x), x)


def test_blur_preserves_constants():
    op = ForwardOperator.gaussian_blur(32, 2.5)
    np.testing.assert_allclose(apply_forward(op, np.full(32, 3.0)), 3.0, atol=1e-12)
    np.testing.assert_allclose(op.materialize().sum(axis=1), 1.0, atol=1e-12)


def test_blur_row_matches_density_oracle():
    op = ForwardOperator.gaussian_blur(8, 1.0, radius=3)
    k = np.arange(-3, 4)
    dens = np.exp(-0.5 * k**2) / np.sqrt(2 * np.pi)
    dens /= dens.sum()
    row = np.zeros(8)
    for kk, v in zip(k, dens):
        row[kk % 8] += v
    np.testing.assert_allclose(op.materialize()[0], row, atol=1e-12)


def test_blur_matrix_is_circulant_and_symmetric_kernel():
    op = ForwardOperator.gaussian_blur(20, 1.7)
    A = op.materialize()
    for k in range(20):
        np.testing.assert_array_equal(A[k], np.roll(A[0], k))
    q = op.kernel()
    np.testing.assert_array_equal(q, q[::-1])


def test_apply_forward_blur_equals_materialized(rng):
    op = ForwardOperator.gaussian_blur(40, 3.0)
    X = rng.standard_normal((5, 40))
    np.testing.assert_allclose(apply_forward(op, X), X @ op.materialize().T, atol=1e-13)


def test_blur_radius_is_clamped():
    assert ForwardOperator.gaussian_blur(10, 5.0).radius == 4


def test_apply_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_forward(ForwardOperator.identity(3), np.zeros(4))


def test_point_mass_samples():
    model = MixtureModel([1.0], [[3.0, -1.0]], np.zeros((1, 2, 2)))
    X, lab = sample_mixture(model, make_rng(0, "t"), 50)
    assert np.all(X == np.array([3.0, -1.0]))
    assert np.all(lab == 0)


def test_zero_weight_never_drawn():
    model = MixtureModel([1.0, 0.0], np.zeros((2, 2)), np.stack([np.eye(2)] * 2))
    _, lab = sample_mixture(model, make_rng(0, "t"), 1000)
    assert np.all(lab == 0)


def test_label_frequencies():
    model = MixtureModel([0.3, 0.7], np.zeros((2, 1)), np.ones((2, 1, 1)))
    _, lab = sample_mixture(model, make_rng(4, "freq"), 100_000)
    assert abs(np.mean(lab == 0) - 0.3) < 0.01


def test_samples_lie_in_component_subspace(rng):
    B = rng.standard_normal((6, 2))
    mu = rng.standard_normal(6)
    model = MixtureModel([1.0], mu[None], (B @ B.T)[None])
    X, _ = sample_mixture(model, make_rng(1, "s"), 200)
    Q, _ = np.linalg.qr(B)
    resid = (X - mu) - (X - mu) @ Q @ Q.T
    assert np.linalg.norm(resid, axis=1).max() < 1e-10


def test_sample_moments_within_three_standard_errors(rng):
    B = rng.standard_normal((3, 3))
    cov = B @ B.T
    mu = np.array([1.0, -2.0, 0.5])
    N = 100_000
    X, _ = sample_mixture(MixtureModel([1.0], mu[None], cov[None]), make_rng(2, "m"), N)
    se_mean = np.sqrt(np.diag(cov) / N)
    assert np.all(np.abs(X.mean(axis=0) - mu) < 3 * se_mean)
    emp = np.cov(X.T, bias=True)
    # var of a sample covariance entry is (S_ii S_jj + S_ij^2) / N
    se_cov = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / N)
    assert np.all(np.abs(emp - cov) < 3.5 * se_cov)


def test_noise_rejects_zero_sigma():
    with pytest.raises(ValueError):
        NoiseModel.iso(0.0)


def test_noise_moments():
    E = sample_noise(NoiseModel.iso(1.0), make_rng(0, "n"), 100_000, 3)
    assert np.abs(E.mean(axis=0)).max() < 0.02
    E = sample_noise(NoiseModel.full(np.diag([1.0, 4.0])), make_rng(0, "n2"), 100_000, 2)
    np.testing.assert_allclose(E.var(axis=0), [1.0, 4.0], rtol=0.05)


def test_full_noise_must_be_spd():
    with pytest.raises(ValueError):
        NoiseModel.full(np.diag([1.0, -1.0]))


def test_coordinate_support_mixture():
    m = mixture_from_coordinate_supports(4, 1, 1, [[2]])
    np.testing.assert_array_equal(m.covariances[0], np.diag([0, 0, 1.0, 0]))
    m = mixture_from_coordinate_supports(10, 3, 4, [[0, 1, 2], [3, 4, 5], [1, 5, 9], [7, 8, 9]])
    assert all(np.linalg.matrix_rank(S) == 3 for S in m.covariances)
    np.testing.assert_allclose(m.weights, 0.25)
    X, _ = sample_mixture(m, make_rng(3, "sup"), 10_000)
    assert np.count_nonzero(X, axis=1).max() <= 3


def test_coordinate_support_rejects_duplicates():
    with pytest.raises(ValueError):
        mixture_from_coordinate_supports(4, 2, 1, [[1, 1]])


def test_model_invariants_enforced():
    with pytest.raises(ValueError):
        MixtureModel([0.5, 0.6], np.zeros((2, 1)), np.ones((2, 1, 1)))
    with pytest.raises(ValueError):
        MixtureModel([1.0], np.zeros((1, 2)), np.array([[[1.0, 0.5], [0.0, 1.0]]]))
    with pytest.raises(ValueError):
        MixtureModel([1.0], np.zeros((1, 2)), np.diag([1.0, -1.0])[None])


def test_factor_form_reproduces_covariance(rng):
    B = rng.standard_normal((5, 2))
    m = MixtureModel.from_factors([1.0], np.zeros((1, 5)), [B])
    np.testing.assert_allclose(m.covariances[0], B @ B.T)
    assert m.sparsity == 2
    with pytest.raises(ValueError):
        MixtureModel([1.0], np.zeros((1, 5)), (B @ B.T)[None], factors=(2 * B,))


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(7, "noise", "train").standard_normal(5)
    b = make_rng(7, "noise", "train").standard_normal(5)
    c = make_rng(7, "noise", "test").standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
