import unittest

import numpy as np
from numpy.testing import assert_allclose
from scipy.stats import norm

from denoisebid.coremath import (
    Gaussian1D, gaussian_product_1d, gh_grid, probit_expectation, sigmoid
)
from denoisebid.posterior import (
    denoise_ctr_1d_batch, denoise_joint_batch, denoised_ctr_1d,
    denoised_ctr_joint, denoised_cvr_joint, denoised_value_joint,
    posterior_components_1d, posterior_components_2d
)
from denoisebid.priors import (
    GmmPrior1D, GmmPrior2D, NoisyObservation1D, NoisyObservation2D,
    independent_product
)

from .common import (
    correlated_prior, ctr_prior, cvr_prior, grid_bayes_ctr_1d,
    grid_bayes_joint, long_tests, random_prior_1d, random_prior_2d
)


class TestPosteriorComponents(unittest.TestCase):

    def test_single_component(self):
        prior = GmmPrior1D([1.], [-2.], [0.5])
        post = posterior_components_1d(NoisyObservation1D(-1., 0.3), prior)
        _, g = gaussian_product_1d(-1., 0.3, Gaussian1D(-2., 0.5))
        assert_allclose(post.weights, [1.])
        assert_allclose(post.means[0], g.mean, rtol=1e-14)
        assert_allclose(post.variances[0], g.variance, rtol=1e-14)

    def test_uninformative_observation(self):
        prior = ctr_prior()
        post = posterior_components_1d(NoisyObservation1D(-1., 1e12), prior)
        assert_allclose(post.weights, prior.weights, atol=1e-4)
        assert_allclose(post.means, prior.means, atol=1e-4)

    def test_weights_match_density_ratio(self):
        prior = ctr_prior()
        post = posterior_components_1d(NoisyObservation1D(-1., 0.25), prior)
        dens = prior.weights*norm.pdf(-1., prior.means,
                                      np.sqrt(prior.variances + 0.25))
        assert_allclose(post.weights, dens/dens.sum(), rtol=1e-12)
        assert_allclose(post.weights.sum(), 1., rtol=1e-14)

    def test_variance_bound(self):
        prior = ctr_prior()
        post = posterior_components_1d(NoisyObservation1D(-2., 0.04), prior)
        self.assertTrue(np.all(post.variances <= 0.04))
        self.assertTrue(np.all(post.variances <= prior.variances))

    def test_far_tail_observation(self):
        prior = GmmPrior1D([0.5, 0.5], [-3., 1.], [1e-4, 1e-4])
        post = posterior_components_1d(NoisyObservation1D(2e3, 1e-6), prior)
        self.assertFalse(post.fallback)
        assert_allclose(post.weights, [0., 1.], atol=1e-300)
        self.assertTrue(np.all(np.isfinite(post.means)))

    def test_2d_components_pd(self):
        prior = correlated_prior()
        post = posterior_components_2d(
            NoisyObservation2D([-2., -1.5], np.diag([0.3, 0.2])), prior
        )
        assert_allclose(post.weights.sum(), 1., rtol=1e-14)
        for g in post.components:
            self.assertGreater(np.linalg.det(g.covariance), 0.)


class TestDenoisedCtr(unittest.TestCase):

    def test_noiseless(self):
        prior = ctr_prior()
        for x in (-5., -2.1, 0.3):
            assert_allclose(
                denoised_ctr_1d(NoisyObservation1D(x, 0.), prior),
                sigmoid(x), rtol=1e-10
            )

    def test_prior_reversion(self):
        prior = GmmPrior1D([1.], [-2.], [0.3])
        val = denoised_ctr_1d(NoisyObservation1D(0.5, 1e12), prior)
        assert_allclose(val, probit_expectation(-2., 0.3), atol=1e-6)

    def test_prior_mean_reversion_mixture(self):
        prior = ctr_prior()
        val = denoised_ctr_1d(NoisyObservation1D(-1.5, 1e12), prior)
        expected = np.dot(prior.weights,
                          probit_expectation(prior.means, prior.variances))
        assert_allclose(val, expected, atol=1e-3)

    def test_monotone_in_observation(self):
        prior = ctr_prior()
        x = np.linspace(-8., 4., 100)
        vals = denoise_ctr_1d_batch(x, 0.5, prior)
        self.assertTrue(np.all(np.diff(vals) > 0))

    def test_convex_combination(self):
        prior = ctr_prior()
        obs = NoisyObservation1D(-1.7, 0.8)
        post = posterior_components_1d(obs, prior)
        comp = probit_expectation(post.means, post.variances)
        val = denoised_ctr_1d(obs, prior)
        self.assertGreaterEqual(val, comp.min())
        self.assertLessEqual(val, comp.max())

    def test_grid_bayes_reference(self):
        val = denoised_ctr_1d(NoisyObservation1D(-2., 1.), ctr_prior())
        self.assertLess(abs(val - grid_bayes_ctr_1d(-2., 1., ctr_prior())),
                        0.01)

    def test_batch_matches_scalar(self):
        prior = ctr_prior()
        x = np.array([-3., -1., 0.5])
        v = np.array([0.1, 0.5, 2.])
        batch = denoise_ctr_1d_batch(x, v, prior)
        for xi, vi, b in zip(x, v, batch):
            assert_allclose(
                denoised_ctr_1d(NoisyObservation1D(xi, vi), prior), b,
                rtol=1e-14
            )

    def test_oracle_agreement_random(self):
        rng = np.random.default_rng(20)
        errs = []
        for _ in range(1000):
            prior = random_prior_1d(rng)
            k = rng.choice(prior.n_components, p=prior.weights)
            xi = rng.normal(prior.means[k], np.sqrt(prior.variances[k]))
            s = rng.uniform(0.01, 3.)
            xhat = xi + s*rng.standard_normal()
            val = denoised_ctr_1d(NoisyObservation1D(xhat, s**2), prior)
            errs.append(abs(val - grid_bayes_ctr_1d(xhat, s**2, prior)))
        self.assertLessEqual(max(errs), 0.015)


class TestDenoisedJoint(unittest.TestCase):

    def test_noiseless(self):
        prior = correlated_prior()
        obs = NoisyObservation2D([-2.2, -0.7], np.zeros((2, 2)))
        assert_allclose(denoised_ctr_joint(obs, prior), sigmoid(-2.2),
                        rtol=1e-6)
        assert_allclose(denoised_value_joint(obs, prior),
                        sigmoid(-2.2)*sigmoid(-0.7), rtol=1e-6)

    def test_separable_ctr(self):
        prior = independent_product(ctr_prior(), cvr_prior())
        obs = NoisyObservation2D([-2.4, -1.1], np.diag([0.49, 0.3]))
        assert_allclose(
            denoised_ctr_joint(obs, prior),
            denoised_ctr_1d(NoisyObservation1D(-2.4, 0.49), ctr_prior()),
            rtol=1e-10
        )
        assert_allclose(
            denoised_cvr_joint(obs, prior),
            denoised_ctr_1d(NoisyObservation1D(-1.1, 0.3), cvr_prior()),
            rtol=1e-10
        )

    def test_value_factorizes(self):
        prior = independent_product(ctr_prior(), cvr_prior())
        obs = NoisyObservation2D([-2.4, -1.1], np.diag([0.25, 0.25]))
        expected = denoised_ctr_1d(NoisyObservation1D(-2.4, 0.25),
                                   ctr_prior()) \
            * denoised_ctr_1d(NoisyObservation1D(-1.1, 0.25), cvr_prior())
        self.assertLess(abs(denoised_value_joint(obs, prior) - expected),
                        2e-3)

    def test_correlated_prior_against_grid(self):
        prior = correlated_prior(0.5)
        obs = NoisyObservation2D([-2., -1.5], np.diag([0.49, 0.49]))
        ctr, _ = grid_bayes_joint(obs.logits, obs.noise_cov, prior)
        self.assertLess(abs(denoised_ctr_joint(obs, prior) - ctr), 0.01)

    def test_value_against_grid(self):
        prior = independent_product(ctr_prior(), cvr_prior())
        obs = NoisyObservation2D([-2., -1.5], np.diag([0.5, 0.5]))
        _, value = grid_bayes_joint(obs.logits, obs.noise_cov, prior)
        self.assertLess(
            abs(denoised_value_joint(obs, prior, gh_grid(5)) - value), 2e-3
        )

    def test_oracle_agreement_random(self):
        rng = np.random.default_rng(21)
        for _ in range(60):
            prior = random_prior_2d(rng)
            s = rng.uniform(0.1, 1.5, 2)
            cov = np.diag(s**2)
            eta = prior.means[0] + rng.multivariate_normal([0, 0], cov)
            obs = NoisyObservation2D(eta, cov)
            ctr, value = grid_bayes_joint(eta, cov, prior, n=201)
            self.assertLess(abs(denoised_ctr_joint(obs, prior) - ctr), 0.015)
            self.assertLess(abs(denoised_value_joint(obs, prior) - value),
                            0.015)

    @long_tests
    def test_oracle_agreement_thousand_draws(self):
        rng = np.random.default_rng(22)
        worst = np.zeros(2)
        for _ in range(1000):
            prior = random_prior_2d(rng)
            k = rng.choice(prior.n_components, p=prior.weights)
            truth = rng.multivariate_normal(prior.means[k],
                                            prior.covariances[k])
            cov = np.diag(rng.uniform(0.01, 3., 2)**2)
            eta = truth + rng.multivariate_normal([0, 0], cov)
            obs = NoisyObservation2D(eta, cov)
            ctr, value = grid_bayes_joint(eta, cov, prior)
            worst = np.maximum(worst, [
                abs(denoised_ctr_joint(obs, prior) - ctr),
                abs(denoised_value_joint(obs, prior) - value),
            ])
        self.assertTrue(np.all(worst <= 0.015), worst)

    def test_uninformative_reverts_to_prior(self):
        prior = GmmPrior2D([1.], [[-2., -1.]], [[[0.2, 0.05], [0.05, .3]]])
        obs = NoisyObservation2D([1., 1.], 1e12*np.eye(2))
        assert_allclose(denoised_ctr_joint(obs, prior),
                        probit_expectation(-2., 0.2), atol=1e-3)

    def test_batch_matches_scalar(self):
        prior = correlated_prior()
        logits = np.array([[-2., -1.], [-3., 0.]])
        covs = np.array([np.diag([0.3, 0.2]), [[0.5, 0.1], [0.1, 0.4]]])
        ctr, value, fallback = denoise_joint_batch(logits, covs, prior,
                                                   return_flags=True)
        self.assertFalse(np.any(fallback))
        for i in range(2):
            obs = NoisyObservation2D(logits[i], covs[i])
            assert_allclose(denoised_ctr_joint(obs, prior), ctr[i],
                            rtol=1e-13)
            assert_allclose(denoised_value_joint(obs, prior), value[i],
                            rtol=1e-13)
