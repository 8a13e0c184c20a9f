import math

import numpy as np
import pytest

from racebo.gp import (
    FactorizationError,
    HyperBounds,
    adapt_hyperparams,
    default_bounds,
    gp_fit,
    gp_posterior,
    gp_update,
    log_marginal_likelihood,
)
from racebo.kernels import KernelFamily, KernelSpec, gram_matrix


def matern1(sv=1.0, ls=1.0):
    return KernelSpec(KernelFamily.MATERN1, signal_variance=sv,
                      length_scales=np.atleast_1d(ls))


def random_problem(rng, n=None, m=None):
    n = n or int(rng.integers(2, 50))
    m = m or int(rng.integers(1, 100))
    W = rng.uniform(0, 1, size=(n, m))
    z = rng.normal(size=n)
    ls = rng.uniform(0.5, 2.0, size=m) * math.sqrt(max(m, 2) / 6)
    kern = matern1(sv=rng.uniform(0.5, 2.0), ls=ls)
    return kern, W, z


def dense_posterior(model, queries):
    """Oracle: posterior by a dense linear solve, no Cholesky reuse."""
    kern = model.kernel
    n = model.num_observations
    K = gram_matrix(kern, model.train_inputs, model.train_inputs)
    K += (model.noise_variance + model.jitter) * np.eye(n)
    ks = gram_matrix(kern, queries, model.train_inputs)
    mean = ks @ np.linalg.solve(K, model.train_targets)
    var = kern.signal_variance - np.einsum("ij,ij->i", ks @ np.linalg.inv(K), ks)
    return mean, np.maximum(var, 0.0)


class TestGpFit:
    def test_single_point_zero_noise(self):
        model = gp_fit(matern1(sv=1.0), 0.0, [[0.3]], [2.0])
        assert model.chol_factor == pytest.approx(
            np.array([[math.sqrt(1.0 + model.jitter)]])
        )

    def test_reconstruction(self):
        rng = np.random.default_rng(0)
        W = rng.normal(size=(10, 3))
        kern = matern1(sv=1.5, ls=[1.0, 0.5, 2.0])
        model = gp_fit(kern, 0.0, W, rng.normal(size=10))
        K = gram_matrix(kern, W, W) + model.jitter * np.eye(10)
        rebuilt = model.chol_factor @ model.chol_factor.T
        assert np.linalg.norm(rebuilt - K) / np.linalg.norm(K) < 1e-8

    def test_duplicate_rows_zero_noise_uses_jitter(self):
        W = np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.9]])
        model = gp_fit(matern1(), 0.0, W, [1.0, 1.0, 2.0])
        assert model.jitter > 0

    def test_refit_idempotent(self):
        rng = np.random.default_rng(1)
        W, z = rng.normal(size=(6, 2)), rng.normal(size=6)
        a = gp_fit(matern1(), 0.0, W, z)
        b = gp_fit(matern1(), 0.0, W, z)
        assert np.array_equal(a.chol_factor, b.chol_factor)
        assert np.array_equal(a.alpha, b.alpha)

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            gp_fit(matern1(), 0.0, [[0.0], [1.0]], [1.0])

    def test_factorization_failure_names_ceiling(self):
        # an indefinite matrix cannot be rescued by any admissible jitter
        from racebo.gp import _try_cholesky

        hostile = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(FactorizationError, match=r"jitter up to 1\.000e-02"):
            _try_cholesky(hostile, signal_variance=1.0)


class TestGpPosterior:
    def test_interpolates_training_data(self):
        rng = np.random.default_rng(2)
        W, z = rng.uniform(0, 1, size=(8, 3)), rng.normal(size=8)
        model = gp_fit(matern1(ls=[0.5, 0.5, 0.5]), 0.0, W, z)
        mean, var = gp_posterior(model, W)
        assert np.abs(mean - z).max() < 1e-6
        assert var.max() < 1e-6

    def test_reverts_to_prior_far_away(self):
        model = gp_fit(matern1(sv=1.3, ls=0.1), 0.0, [[0.0]], [5.0])
        mean, var = gp_posterior(model, [[50.0]])
        assert abs(mean[0]) < 1e-9
        assert var[0] == pytest.approx(1.3, abs=1e-9)

    def test_matches_dense_solve_oracle(self):
        rng = np.random.default_rng(3)
        kern, W, z = random_problem(rng, n=20, m=4)
        model = gp_fit(kern, 0.0, W, z)
        Q = rng.uniform(0, 1, size=(5, 4))
        mean, var = gp_posterior(model, Q)
        mean_o, var_o = dense_posterior(model, Q)
        assert np.abs(mean - mean_o).max() < 1e-8
        assert np.abs(var - var_o).max() < 1e-8

    def test_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(4)
        kern, W, z = random_problem(rng, n=25, m=3)
        model = gp_fit(kern, 0.0, W, z)
        _, var = gp_posterior(model, rng.uniform(-1, 2, size=(50, 3)))
        assert var.max() <= kern.signal_variance + 1e-9
        assert var.min() >= 0.0

    def test_dimension_mismatch(self):
        model = gp_fit(matern1(), 0.0, [[0.0, 0.0]], [1.0])
        with pytest.raises(ValueError):
            gp_posterior(model, [[1.0, 2.0, 3.0]])


class TestGpUpdate:
    def test_update_equals_refit(self):
        rng = np.random.default_rng(5)
        kern, W, z = random_problem(rng, n=15, m=3)
        model = gp_fit(kern, 0.0, W[:1], z[:1])
        for i in range(1, 15):
            model = gp_update(model, W[i], z[i])
        oneshot = gp_fit(kern, 0.0, W, z)
        Q = rng.uniform(0, 1, size=(6, 3))
        m1, v1 = gp_posterior(model, Q)
        m2, v2 = gp_posterior(oneshot, Q)
        assert np.abs(m1 - m2).max() < 1e-8
        assert np.abs(v1 - v2).max() < 1e-8

    def test_still_interpolates_old_points(self):
        rng = np.random.default_rng(6)
        W, z = rng.uniform(0, 1, size=(5, 2)), rng.normal(size=5)
        model = gp_fit(matern1(), 0.0, W[:4], z[:4])
        model = gp_update(model, W[4], z[4])
        mean, _ = gp_posterior(model, W[:4])
        assert np.abs(mean - z[:4]).max() < 1e-6

    def test_duplicate_update_no_error(self):
        model = gp_fit(matern1(), 0.0, [[0.2, 0.8]], [1.0])
        model = gp_update(model, [0.2, 0.8], 1.0)
        assert model.num_observations == 2


class TestLogMarginalLikelihood:
    def test_single_point_closed_form(self):
        model = gp_fit(matern1(sv=1.0), 0.0, [[0.0]], [0.0])
        assert model.jitter == 0.0
        assert log_marginal_likelihood(model) == pytest.approx(
            -0.5 * math.log(2 * math.pi), abs=1e-9
        )

    def test_matches_dense_determinant_oracle(self):
        rng = np.random.default_rng(7)
        kern, W, z = random_problem(rng, n=10, m=3)
        model = gp_fit(kern, 0.05, W, z)
        n = 10
        K = gram_matrix(kern, W, W) + (0.05 + model.jitter) * np.eye(n)
        _, logdet = np.linalg.slogdet(K)
        lml_o = -0.5 * z @ np.linalg.solve(K, z) - 0.5 * logdet \
            - 0.5 * n * math.log(2 * math.pi)
        assert log_marginal_likelihood(model) == pytest.approx(lml_o, abs=1e-6)

    def test_zero_targets_leave_only_complexity_terms(self):
        rng = np.random.default_rng(8)
        W = rng.uniform(0, 1, size=(6, 2))
        model = gp_fit(matern1(), 0.0, W, np.zeros(6))
        K = gram_matrix(matern1(), W, W) + model.jitter * np.eye(6)
        _, logdet = np.linalg.slogdet(K)
        expected = -0.5 * logdet - 3 * math.log(2 * math.pi)
        assert log_marginal_likelihood(model) == pytest.approx(expected, abs=1e-9)


class TestAdaptHyperparams:
    def test_recovers_shorter_length_scale(self):
        # data drawn from a GP with length-scale 0.5; start the model at 5.0
        rng = np.random.default_rng(9)
        true_kern = matern1(sv=1.0, ls=0.5)
        W = rng.uniform(0, 4, size=(30, 1))
        cov = gram_matrix(true_kern, W, W) + 1e-10 * np.eye(30)
        z = np.linalg.cholesky(cov) @ rng.standard_normal(30)
        start = gp_fit(matern1(sv=1.0, ls=5.0), 0.0, W, z)
        adapted = adapt_hyperparams(start)
        assert log_marginal_likelihood(adapted) > log_marginal_likelihood(start)
        assert 0.1 <= adapted.kernel.length_scales[0] <= 2.5

    def test_identical_targets_no_error(self):
        model = gp_fit(matern1(), 0.0, [[0.0], [1.0]], [2.0, 2.0])
        adapted = adapt_hyperparams(model)
        assert adapted.num_observations == 2

    def test_collapsed_bounds_return_input(self):
        model = gp_fit(matern1(sv=1.0, ls=1.0), 0.0, [[0.0], [1.0]], [1.0, -1.0])
        bounds = HyperBounds(signal_variance=(1.0, 1.0),
                             length_scales=np.array([[1.0, 1.0]]))
        assert adapt_hyperparams(model, bounds) is model

    def test_needs_two_observations(self):
        model = gp_fit(matern1(), 0.0, [[0.0]], [1.0])
        with pytest.raises(ValueError):
            adapt_hyperparams(model)

    def test_noise_variance_stays_fixed(self):
        rng = np.random.default_rng(10)
        model = gp_fit(matern1(), 0.0, rng.normal(size=(8, 2)), rng.normal(size=8))
        adapted = adapt_hyperparams(model)
        assert adapted.noise_variance == 0.0

    def test_default_bounds_track_initial_scales(self):
        kern = matern1(ls=[2.0, 0.5])
        b = default_bounds(kern)
        assert b.length_scale_interval(0) == (2e-3, 2e3)
        assert b.length_scale_interval(1) == (5e-4, 5e2)
