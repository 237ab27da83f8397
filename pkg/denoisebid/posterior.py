# -*- coding: utf-8 -*-
"""
Denoised posterior expectations of CTR and CTR*CVR.

For a mixture prior and a Gaussian noise model in logit space the
posterior is again a mixture whose components come from the Gaussian
product reduction; its weights are the prior weights times the component
evidences, renormalized.  Expectations of the sigmoid use the probit
approximation, expectations of the product of two sigmoids use a
Cholesky-rotated Gauss-Hermite tensor grid.

The ``*_batch`` functions evaluate whole campaigns at once; the scalar
functions wrap them for a single observation.
"""
import logging

import numpy as np
from scipy.special import logsumexp

from denoisebid import constants as const
from denoisebid.coremath import (
    DomainError, Gaussian1D, Gaussian2D,
    gaussian_product_1d_arrays, gaussian_product_2d_arrays,
    probit_expectation, gh_sigmoid_product_arrays, gh_grid
)
from denoisebid.priors import check_noise_covariance

logger = logging.getLogger(__name__)


class PosteriorComponents1D(object):
    """Posterior mixture of one observation under a univariate prior."""

    def __init__(self, weights, means, variances, fallback=False):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.variances = np.asarray(variances, dtype=float)
        self.fallback = bool(fallback)

    @property
    def components(self):
        return [Gaussian1D(m, v) for m, v in zip(self.means, self.variances)]

    def __repr__(self):
        return 'PosteriorComponents1D(weights=%s, means=%s, variances=%s)' % (
            self.weights.tolist(), self.means.tolist(),
            self.variances.tolist())


class PosteriorComponents2D(object):
    """Posterior mixture of one observation under a bivariate prior."""

    def __init__(self, weights, means, covariances, fallback=False):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.covariances = np.asarray(covariances, dtype=float)
        self.fallback = bool(fallback)

    @property
    def components(self):
        return [Gaussian2D(m, c)
                for m, c in zip(self.means, self.covariances)]

    def __repr__(self):
        return 'PosteriorComponents2D(weights=%s, means=%s)' % (
            self.weights.tolist(), self.means.tolist())


# =============================================================================
# POSTERIOR MIXTURES
# =============================================================================


def _normalize_log_weights(log_w, logits, means):
    """Softmax along the component axis.

    Rows whose evidences all underflow get weight 1 on the nearest
    component mean.
    """
    lse = logsumexp(log_w, axis=1)
    fallback = ~np.isfinite(lse)
    with np.errstate(invalid='ignore'):
        weights = np.exp(log_w - lse[:, np.newaxis])
    if np.any(fallback):
        dist = np.abs(
            logits[fallback][:, np.newaxis] - means[np.newaxis]
        ).reshape(np.sum(fallback), means.shape[0], -1).sum(axis=-1)
        nearest = np.argmin(dist, axis=1)
        weights[fallback] = 0.
        weights[np.flatnonzero(fallback), nearest] = 1.
        logger.warning("evidence underflow for %d observation(s); "
                       "using the nearest prior component",
                       np.sum(fallback))
    return weights, fallback


def posterior_1d_arrays(logits, variances, prior):
    """
    Posterior mixtures for N observations under a univariate prior.

    Returns
    -------
    weights, means, variances : ndarray
        (N, K) posterior weights and component parameters.
    fallback : ndarray
        (N,) mask of observations that used the underflow fallback.
    """
    logits = np.atleast_1d(np.asarray(logits, dtype=float))
    variances = np.broadcast_to(
        np.asarray(variances, dtype=float), logits.shape
    )
    if np.any(~(variances >= 0)):
        raise DomainError("noise variances must be >= 0")
    log_alpha, pmean, pvar = gaussian_product_1d_arrays(
        logits[:, np.newaxis], variances[:, np.newaxis],
        prior.means[np.newaxis], prior.variances[np.newaxis]
    )
    log_w = np.log(prior.weights)[np.newaxis] + log_alpha
    weights, fallback = _normalize_log_weights(log_w, logits, prior.means)
    return weights, pmean, pvar, fallback


def posterior_2d_arrays(logits, covs, prior):
    """Bivariate analogue of :func:`posterior_1d_arrays`.

    Returns (N, K) weights, (N, K, 2) means, (N, K, 2, 2) covariances and
    the (N,) fallback mask.
    """
    logits = np.asarray(logits, dtype=float).reshape(-1, 2)
    covs = np.broadcast_to(
        np.asarray(covs, dtype=float), (len(logits), 2, 2)
    )
    check_noise_covariance(covs)
    log_alpha, pmean, pcov = gaussian_product_2d_arrays(
        logits[:, np.newaxis], covs[:, np.newaxis],
        prior.means[np.newaxis], prior.covariances[np.newaxis]
    )
    log_w = np.log(prior.weights)[np.newaxis] + log_alpha
    weights, fallback = _normalize_log_weights(log_w, logits, prior.means)
    return weights, pmean, pcov, fallback


def posterior_components_1d(obs, prior):
    """Posterior mixture of a NoisyObservation1D under a GmmPrior1D."""
    w, m, v, fb = posterior_1d_arrays(obs.logit, obs.noise_variance, prior)
    return PosteriorComponents1D(w[0], m[0], v[0], fallback=fb[0])


def posterior_components_2d(obs, prior):
    """Posterior mixture of a NoisyObservation2D under a GmmPrior2D."""
    w, m, c, fb = posterior_2d_arrays(obs.logits, obs.noise_cov, prior)
    return PosteriorComponents2D(w[0], m[0], c[0], fallback=fb[0])


# =============================================================================
# DENOISED EXPECTATIONS
# =============================================================================


def denoise_ctr_1d_batch(logits, variances, prior, return_flags=False):
    """
    E[CTR_t | observation_t] for arrays of observed logits and variances.

    Parameters
    ----------
    logits : array_like
        (N,) predicted logit-CTRs.
    variances : array_like
        (N,) or scalar logit noise variances.
    prior : GmmPrior1D
    return_flags : bool, optional
        Also return the (N,) evidence-underflow fallback mask.
    """
    w, m, v, fallback = posterior_1d_arrays(logits, variances, prior)
    ctr = np.sum(w*probit_expectation(m, v), axis=1)
    if return_flags:
        return ctr, fallback
    return ctr


def denoise_joint_batch(logits, covs, prior, grid=None, return_flags=False):
    """
    Denoised E[CTR_t] and E[CTR_t CVR_t] under a bivariate prior.

    Parameters
    ----------
    logits : array_like
        (N, 2) predicted (logit-CTR, logit-CVR).
    covs : array_like
        (N, 2, 2) or (2, 2) logit noise covariances.
    prior : GmmPrior2D
    grid : QuadratureGrid, optional
        Defaults to order 5.

    Returns
    -------
    ctr, value : ndarray
        (N,) denoised click and conversion probabilities.
    """
    if grid is None:
        grid = gh_grid(const.default_quadrature_order)
    w, m, c, fallback = posterior_2d_arrays(logits, covs, prior)
    ctr = np.sum(w*probit_expectation(m[..., 0], c[..., 0, 0]), axis=1)
    value = np.sum(w*gh_sigmoid_product_arrays(m, c, grid), axis=1)
    if logger.isEnabledFor(logging.DEBUG):
        cvr = np.sum(w*probit_expectation(m[..., 1], c[..., 1, 1]), axis=1)
        loose = value > np.minimum(ctr, cvr) + 0.05
        if np.any(loose):
            logger.debug("%d denoised value(s) exceed min(ctr, cvr) + 0.05",
                         np.sum(loose))
    if return_flags:
        return ctr, value, fallback
    return ctr, value


def denoised_ctr_1d(obs, prior):
    """Closed-form E[CTR | observation] for a NoisyObservation1D."""
    return float(denoise_ctr_1d_batch(obs.logit, obs.noise_variance,
                                      prior)[0])


def denoised_ctr_joint(obs, prior):
    """E[CTR | observation] under a bivariate prior (probit, CTR axis)."""
    w, m, c, _ = posterior_2d_arrays(obs.logits, obs.noise_cov, prior)
    return float(np.sum(w*probit_expectation(m[..., 0], c[..., 0, 0])))


def denoised_cvr_joint(obs, prior):
    """E[CVR | observation] under a bivariate prior (probit, CVR axis)."""
    w, m, c, _ = posterior_2d_arrays(obs.logits, obs.noise_cov, prior)
    return float(np.sum(w*probit_expectation(m[..., 1], c[..., 1, 1])))


def denoised_value_joint(obs, prior, grid=None):
    """E[CTR CVR | observation] via Gauss-Hermite quadrature."""
    if grid is None:
        grid = gh_grid(const.default_quadrature_order)
    w, m, c, _ = posterior_2d_arrays(obs.logits, obs.noise_cov, prior)
    return float(np.sum(w*gh_sigmoid_product_arrays(m, c, grid)))
