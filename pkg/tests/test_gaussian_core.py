import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, norm

from csps.gaussian_core import (ActiveDesign, NumericalBreakdown, coefficient_posterior,
                                latent_conditional, leverages, log_marginal_column,
                                log_marginal_from_gram, refresh_after_latent_change)
from csps.model import Hyperparameters


def random_instance(rng, n, m, v=None):
    X = rng.normal(size=(n, m))
    X[:, 0] = 1.0
    mu = rng.normal(scale=0.7, size=m)
    v = rng.uniform(0.2, 5.0) if v is None else v
    z = rng.normal(size=n) * 1.5
    return ActiveDesign(X, mu, v), z


def dense_cov(d):
    X = d.columns
    return np.eye(d.n) + d.prior_var * X @ X.T


def dense_conditional(d, z, i):
    C = dense_cov(d)
    mean = d.columns @ d.prior_mean
    o = np.delete(np.arange(d.n), i)
    w = np.linalg.solve(C[np.ix_(o, o)], C[o, i])
    return mean[i] + w @ (z[o] - mean[o]), C[i, i] - C[i, o] @ w


class TestActiveDesign:
    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            ActiveDesign(np.ones((3, 2)), np.zeros(3), 1.0)
        with pytest.raises(ValueError):
            ActiveDesign(np.ones((3, 1)), np.zeros(1), 0.0)

    def test_from_row(self):
        hp = Hyperparameters(mu=np.array([0.5, 1.0, 2.0]), tau2=6.0)
        X = np.arange(12.0).reshape(4, 3)
        d = ActiveDesign.from_row(X, np.array([1, 0, 1]), hp)
        np.testing.assert_array_equal(d.columns, X[:, [0, 2]])
        assert d.prior_var == 3.0
        np.testing.assert_array_equal(d.prior_var_vector, [3.0, 3.0])


class TestCoefficientPosterior:
    def test_no_data_is_prior(self):
        d = ActiveDesign(np.ones((0, 2)), np.array([0.3, -1.0]), 2.0)
        post = coefficient_posterior(d, np.zeros(0))
        np.testing.assert_allclose(post.mean, d.prior_mean)
        np.testing.assert_allclose(post.covariance(), 2.0 * np.eye(2))

    def test_scalar_ridge(self):
        d = ActiveDesign(np.ones((2, 1)), np.zeros(1), 4.0)
        post = coefficient_posterior(d, np.array([1.0, -1.0]))
        assert post.mean[0] == pytest.approx(0.0, abs=1e-15)
        assert post.covariance()[0, 0] == pytest.approx(1 / 2.25)

    def test_diffuse_limit_is_least_squares(self, rng):
        d, z = random_instance(rng, 30, 4, v=1e10)
        ls = np.linalg.solve(d.columns.T @ d.columns, d.columns.T @ z)
        np.testing.assert_allclose(coefficient_posterior(d, z).mean, ls, rtol=1e-7)

    def test_wrong_length(self, rng):
        d, z = random_instance(rng, 5, 2)
        with pytest.raises(ValueError):
            coefficient_posterior(d, z[:-1])

    def test_breakdown_is_reported(self):
        d = ActiveDesign(np.array([[np.nan]]), np.zeros(1), 1.0)
        with pytest.raises(NumericalBreakdown):
            coefficient_posterior(d, np.zeros(1))


class TestLogMarginal:
    def test_univariate(self):
        d = ActiveDesign(np.ones((1, 1)), np.zeros(1), 4.0)
        assert log_marginal_column(d, np.array([0.7])) == pytest.approx(
            norm.logpdf(0.7, scale=math.sqrt(5.0)), abs=1e-14)

    def test_small_dense_instance(self, rng):
        d, z = random_instance(rng, 5, 2)
        ref = multivariate_normal(d.columns @ d.prior_mean, dense_cov(d)).logpdf(z)
        assert log_marginal_column(d, z) == pytest.approx(ref, abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.integers(1, 5))
    def test_woodbury_matches_dense(self, seed, n, m):
        rng = np.random.default_rng(seed)
        d, z = random_instance(rng, n, m)
        ref = multivariate_normal(d.columns @ d.prior_mean, dense_cov(d)).logpdf(z)
        assert log_marginal_column(d, z) == pytest.approx(ref, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.integers(1, 6))
    def test_gram_route_matches(self, seed, n, P):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, P))
        X[:, 0] = 1
        mu = rng.normal(size=P)
        z = rng.normal(size=n)
        idx = np.flatnonzero(np.r_[1, rng.integers(0, 2, P - 1)])
        v = 4.0 / idx.size
        d = ActiveDesign(X[:, idx], mu[idx], v)
        got = log_marginal_from_gram(X.T @ X, X.T @ z, float(z @ z), n, mu, idx, v)
        assert got == pytest.approx(log_marginal_column(d, z), abs=1e-10)

    def test_toggle_ratio_is_conjugate_ratio(self, rng):
        # log m(z | M') - log m(z | M) equals the log ratio of the conjugate
        # normalising constants, |Vt|^1/2 |V|^-1/2 exp{(mt' Vt^-1 mt - mu' V^-1 mu)/2}
        X = rng.normal(size=(12, 3))
        X[:, 0] = 1
        mu = np.array([-0.3, 0.2, 0.0])
        z = rng.normal(size=12)

        def log_const(idx):
            v = 4.0 / len(idx)
            d = ActiveDesign(X[:, idx], mu[idx], v)
            post = coefficient_posterior(d, z)
            A = post.precision_factor @ post.precision_factor.T
            return (0.5 * (post.log_det_Vtilde - post.log_det_V)
                    + 0.5 * (post.mean @ A @ post.mean - mu[idx] @ mu[idx] / v))

        a, b = [0, 1], [0, 1, 2]
        da = ActiveDesign(X[:, a], mu[a], 2.0)
        db = ActiveDesign(X[:, b], mu[b], 4.0 / 3)
        lhs = log_marginal_column(db, z) - log_marginal_column(da, z)
        assert lhs == pytest.approx(log_const(b) - log_const(a), abs=1e-10)


class TestLatentConditional:
    def test_single_unit(self):
        d = ActiveDesign(np.array([[1.0, 0.5]]), np.array([0.2, -0.4]), 1.5)
        post = coefficient_posterior(d, np.array([0.9]))
        mean, var = latent_conditional(d, np.array([0.9]), 0, post)
        x = d.columns[0]
        assert mean == pytest.approx(x @ d.prior_mean, abs=1e-12)
        assert var == pytest.approx(1 + 1.5 * x @ x, abs=1e-12)

    def test_six_units_schur(self, rng):
        d, z = random_instance(rng, 6, 2)
        post = coefficient_posterior(d, z)
        for i in range(6):
            got = latent_conditional(d, z, i, post)
            np.testing.assert_allclose(got, dense_conditional(d, z, i), atol=1e-8)

    def test_pinned_coefficients(self, rng):
        d, z = random_instance(rng, 6, 2, v=1e-12)
        post = coefficient_posterior(d, z)
        mean, var = latent_conditional(d, z, 2, post)
        assert mean == pytest.approx(d.columns[2] @ d.prior_mean, abs=1e-8)
        assert var == pytest.approx(1.0, abs=1e-8)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 4))
    def test_matches_dense_conditioning(self, seed, n, m):
        rng = np.random.default_rng(seed)
        d, z = random_instance(rng, n, m)
        post = coefficient_posterior(d, z)
        i = int(rng.integers(n))
        if n == 1:
            ref = (d.columns[0] @ d.prior_mean, dense_cov(d)[0, 0])
        else:
            ref = dense_conditional(d, z, i)
        np.testing.assert_allclose(latent_conditional(d, z, i, post), ref, atol=1e-8, rtol=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_sequential_conditionals_give_density_ratios(self, seed, n):
        # changing z_i alone: log pi(z') - log pi(z) = conditional log density ratio
        rng = np.random.default_rng(seed)
        d, z = random_instance(rng, n, 2)
        i = int(rng.integers(n))
        z2 = z.copy()
        z2[i] += rng.normal()
        post = coefficient_posterior(d, z)
        mean, var = latent_conditional(d, z, i, post)
        lhs = log_marginal_column(d, z2) - log_marginal_column(d, z)
        rhs = norm.logpdf(z2[i], mean, math.sqrt(var)) - norm.logpdf(z[i], mean, math.sqrt(var))
        assert lhs == pytest.approx(rhs, abs=1e-8)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.integers(1, 5))
    def test_leverages_in_unit_interval(self, seed, n, m):
        rng = np.random.default_rng(seed)
        d, z = random_instance(rng, n, m)
        h = leverages(d, coefficient_posterior(d, z))
        assert np.all(h >= 0) and np.all(h < 1)


class TestRefresh:
    def test_zero_change_returns_cache(self, rng):
        d, z = random_instance(rng, 5, 2)
        post = coefficient_posterior(d, z)
        assert refresh_after_latent_change(post, d, 1, z[1], z[1]) is post

    def test_single_update(self, rng):
        d, z = random_instance(rng, 8, 3)
        post = coefficient_posterior(d, z)
        z2 = z.copy()
        z2[4] = -2.0
        new = refresh_after_latent_change(post, d, 4, z[4], z2[4])
        np.testing.assert_allclose(new.mean, coefficient_posterior(d, z2).mean, atol=1e-10)

    def test_n_sequential_updates(self, rng):
        d, z = random_instance(rng, 40, 4)
        post = coefficient_posterior(d, z)
        for i in range(d.n):
            new = rng.normal()
            post = refresh_after_latent_change(post, d, i, z[i], new)
            z[i] = new
        np.testing.assert_allclose(post.mean, coefficient_posterior(d, z).mean, atol=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_interleaved_latent_and_row_changes(self, seed):
        # incremental caches, refactored on row changes, track scratch values
        rng = np.random.default_rng(seed)
        n, P = 10, 4
        X = rng.normal(size=(n, P))
        X[:, 0] = 1
        hp = Hyperparameters(mu=rng.normal(size=P), tau2=3.0)
        row = np.array([1, 1, 0, 1])
        z = rng.normal(size=n)
        d = ActiveDesign.from_row(X, row, hp)
        post = coefficient_posterior(d, z)
        for _ in range(40):
            if rng.random() < 0.2:
                k = int(rng.integers(1, P))
                row[k] ^= 1
                d = ActiveDesign.from_row(X, row, hp)
                post = coefficient_posterior(d, z)
            else:
                i = int(rng.integers(n))
                new = rng.normal()
                post = refresh_after_latent_change(post, d, i, z[i], new)
                z[i] = new
        np.testing.assert_allclose(post.mean, coefficient_posterior(d, z).mean, atol=1e-10)
