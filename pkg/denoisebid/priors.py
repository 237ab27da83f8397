# -*- coding: utf-8 -*-
"""
Gaussian-mixture priors over logit-CTR and (logit-CTR, logit-CVR).

Priors are recovered from heteroscedastically noisy logits by extreme
deconvolution: an EM algorithm for a Gaussian mixture in which every
observation carries its own, known, Gaussian noise covariance S_t.  The
marginal density of an observation is

    p(x_t) = sum_k pi_k N(x_t | mu_k, Theta_k + S_t)

E-step, per sample and component::

    q_tk  ~ pi_k N(x_t | mu_k, T_tk),             T_tk = Theta_k + S_t
    b_tk  = mu_k + Theta_k T_tk^-1 (x_t - mu_k)
    B_tk  = Theta_k - Theta_k T_tk^-1 Theta_k

M-step::

    pi_k    = mean_t q_tk
    mu_k    = sum_t q_tk b_tk / sum_t q_tk
    Theta_k = sum_t q_tk [(b_tk - mu_k)(b_tk - mu_k)^T + B_tk] / sum_t q_tk

With all S_t = 0 this is exactly the standard GMM EM step.  The fitting
code works on (N, D) / (N, D, D) arrays with D in {1, 2}.
"""
import logging

import numpy as np
from scipy.special import logsumexp

from denoisebid import constants as const
from denoisebid.coremath import (
    Gaussian1D, Gaussian2D, DomainError, is_positive_definite
)

logger = logging.getLogger(__name__)


class FitError(RuntimeError):
    """Deconvolution cannot proceed on the given observations."""


# =============================================================================
# PRIOR TYPES
# =============================================================================


class _GmmPrior(object):
    """Common storage for mixtures of D-variate Gaussians."""

    dim = None

    def __init__(self, weights, means, covariances, diagnostics=None):
        weights = np.array(weights, dtype=float).reshape(-1)
        K = len(weights)
        if K < 1:
            raise DomainError("a mixture needs at least one component")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise DomainError("mixture weights must be > 0, got %s"
                              % weights)
        if abs(weights.sum() - 1.) > 1e-10:
            raise DomainError("mixture weights must sum to 1, got %.16g"
                              % weights.sum())
        means = np.array(means, dtype=float).reshape(K, self.dim)
        covariances = np.array(
            covariances, dtype=float
        ).reshape(K, self.dim, self.dim)
        if np.any(~np.isfinite(means)) or np.any(~np.isfinite(covariances)):
            raise DomainError("mixture parameters must be finite")
        for arr in (weights, means, covariances):
            arr.flags.writeable = False
        self._weights = weights
        self._means = means
        self._covs = covariances
        self.diagnostics = diagnostics

    @property
    def n_components(self):
        return len(self._weights)

    @property
    def weights(self):
        return self._weights

    @property
    def means_array(self):
        """(K, D) component means"""
        return self._means

    @property
    def covariances_array(self):
        """(K, D, D) component covariances"""
        return self._covs

    def permuted(self, order):
        """Return the same mixture with components reordered."""
        order = np.asarray(order, dtype=int)
        return self.__class__._from_arrays(
            self._weights[order], self._means[order], self._covs[order]
        )

    def __repr__(self):
        return '%s(K=%d, weights=%s, means=%s)' % (
            self.__class__.__name__, self.n_components,
            np.round(self._weights, 4).tolist(),
            np.round(self._means, 4).tolist()
        )


class GmmPrior1D(_GmmPrior):
    """Mixture prior over logit-CTR."""

    dim = 1

    def __init__(self, weights, means, variances, diagnostics=None):
        variances = np.array(variances, dtype=float).reshape(-1)
        if np.any(~(variances > 0)):
            raise DomainError("component variances must be > 0, got %s"
                              % variances)
        super(GmmPrior1D, self).__init__(
            weights, means, variances, diagnostics=diagnostics
        )

    @classmethod
    def _from_arrays(cls, weights, means, covs, diagnostics=None):
        return cls(weights, np.reshape(means, -1), np.reshape(covs, -1),
                   diagnostics=diagnostics)

    @classmethod
    def from_sigmas(cls, weights, means, sigmas):
        """Build from component standard deviations."""
        return cls(weights, means, np.square(np.asarray(sigmas, float)))

    @property
    def means(self):
        return self._means[:, 0]

    @property
    def variances(self):
        return self._covs[:, 0, 0]

    @property
    def components(self):
        return [Gaussian1D(m, v) for m, v in zip(self.means, self.variances)]

    def mean_logit(self):
        return float(np.dot(self._weights, self.means))


class GmmPrior2D(_GmmPrior):
    """Mixture prior over (logit-CTR, logit-CVR)."""

    dim = 2

    def __init__(self, weights, means, covariances, diagnostics=None):
        covariances = np.array(covariances, dtype=float).reshape(-1, 2, 2)
        covariances = 0.5*(covariances + np.swapaxes(covariances, 1, 2))
        if not np.all(is_positive_definite(covariances)):
            raise DomainError("component covariances must be PD")
        super(GmmPrior2D, self).__init__(
            weights, means, covariances, diagnostics=diagnostics
        )

    @classmethod
    def _from_arrays(cls, weights, means, covs, diagnostics=None):
        return cls(weights, means, covs, diagnostics=diagnostics)

    @property
    def means(self):
        return self._means

    @property
    def covariances(self):
        return self._covs

    @property
    def components(self):
        return [Gaussian2D(m, c) for m, c in zip(self._means, self._covs)]

    def marginal(self, axis):
        """Univariate marginal mixture along ``axis`` (0=CTR, 1=CVR)."""
        return GmmPrior1D(self._weights, self._means[:, axis],
                          self._covs[:, axis, axis])


def independent_product(prior_ctr, prior_cvr):
    """Bivariate mixture of two independent univariate mixtures."""
    w = np.outer(prior_ctr.weights, prior_cvr.weights).ravel()
    mi, mj = np.meshgrid(prior_ctr.means, prior_cvr.means, indexing='ij')
    vi, vj = np.meshgrid(prior_ctr.variances, prior_cvr.variances,
                         indexing='ij')
    K = len(w)
    covs = np.zeros((K, 2, 2))
    covs[:, 0, 0] = vi.ravel()
    covs[:, 1, 1] = vj.ravel()
    means = np.column_stack([mi.ravel(), mj.ravel()])
    return GmmPrior2D(w/w.sum(), means, covs)


# =============================================================================
# OBSERVATIONS
# =============================================================================


class NoisyObservation1D(object):
    """Predicted logit with its noise variance."""

    __slots__ = ('logit', 'noise_variance')

    def __init__(self, logit, noise_variance):
        logit = float(logit)
        noise_variance = float(noise_variance)
        if not np.isfinite(logit):
            raise DomainError("observed logit must be finite")
        if not np.isfinite(noise_variance) or noise_variance < 0:
            raise DomainError("noise variance must be >= 0, got %s"
                              % noise_variance)
        self.logit = logit
        self.noise_variance = noise_variance

    def __repr__(self):
        return 'NoisyObservation1D(logit=%r, noise_variance=%r)' % (
            self.logit, self.noise_variance)


class NoisyObservation2D(object):
    """Predicted (logit-CTR, logit-CVR) with noise covariance."""

    __slots__ = ('logits', 'noise_cov')

    def __init__(self, logits, noise_cov):
        logits = np.array(logits, dtype=float).reshape(2)
        noise_cov = np.array(noise_cov, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(logits)) \
                or not np.all(np.isfinite(noise_cov)):
            raise DomainError("observation entries must be finite")
        check_noise_covariance(noise_cov)
        self.logits = logits
        self.noise_cov = 0.5*(noise_cov + noise_cov.T)

    def __repr__(self):
        return 'NoisyObservation2D(logits=%r, noise_cov=%r)' % (
            self.logits.tolist(), self.noise_cov.tolist())


def check_noise_covariance(cov, tol=const.pd_tol):
    """Raise DomainError unless the (..., 2, 2) stack is symmetric PSD."""
    cov = np.asarray(cov, dtype=float)
    scale = np.maximum(np.abs(cov).max(axis=(-1, -2)), const.epsf)
    asym = np.abs(cov[..., 0, 1] - cov[..., 1, 0])
    det = cov[..., 0, 0]*cov[..., 1, 1] - cov[..., 0, 1]*cov[..., 1, 0]
    ok = (asym <= tol*scale) \
        & (cov[..., 0, 0] >= 0) & (cov[..., 1, 1] >= 0) \
        & (det >= -tol*scale**2)
    if not np.all(ok):
        raise DomainError("noise covariance must be symmetric PSD")


def stack_observations_1d(obs):
    """(logits, variances) arrays from records or an array pair."""
    if isinstance(obs, tuple) and len(obs) == 2 \
            and not isinstance(obs[0], NoisyObservation1D):
        logits = np.array(obs[0], dtype=float).reshape(-1)
        variances = np.broadcast_to(
            np.array(obs[1], dtype=float), logits.shape
        ).copy()
    else:
        obs = list(obs)
        logits = np.array([o.logit for o in obs], dtype=float)
        variances = np.array([o.noise_variance for o in obs], dtype=float)
    if len(logits) == 0:
        raise FitError("no observations given")
    if not np.all(np.isfinite(logits)) or np.any(~(variances >= 0)):
        raise FitError("observations must be finite with variances >= 0")
    return logits, variances


def stack_observations_2d(obs):
    """(logits (N, 2), covariances (N, 2, 2)) from records or arrays."""
    if isinstance(obs, tuple) and len(obs) == 2 \
            and not isinstance(obs[0], NoisyObservation2D):
        logits = np.array(obs[0], dtype=float).reshape(-1, 2)
        covs = np.broadcast_to(
            np.array(obs[1], dtype=float), (len(logits), 2, 2)
        ).copy()
    else:
        obs = list(obs)
        logits = np.array([o.logits for o in obs], dtype=float)
        covs = np.array([o.noise_cov for o in obs], dtype=float)
    if len(logits) == 0:
        raise FitError("no observations given")
    if not np.all(np.isfinite(logits)):
        raise FitError("observations must be finite")
    try:
        check_noise_covariance(covs)
    except DomainError as err:
        raise FitError(str(err))
    return logits, covs.reshape(-1, 2, 2)


# =============================================================================
# MARGINAL LIKELIHOOD
# =============================================================================


def _log_joint(X, S, weights, means, covs):
    """log pi_k + log N(x_t | mu_k, Theta_k + S_t), plus E-step pieces."""
    N, D = X.shape
    T = covs[np.newaxis] + S[:, np.newaxis]
    Tinv = np.linalg.inv(T)
    _, logdet = np.linalg.slogdet(T)
    delta = X[:, np.newaxis, :] - means[np.newaxis]
    maha = np.einsum('nki,nkij,nkj->nk', delta, Tinv, delta)
    log_dens = -0.5*(maha + logdet + D*const.log_2pi)
    return np.log(weights)[np.newaxis] + log_dens, Tinv, delta


def _marginal_loglik(X, S, weights, means, covs):
    log_joint, _, _ = _log_joint(X, S, weights, means, covs)
    return float(logsumexp(log_joint, axis=1).sum())


def marginal_loglik_1d(prior, obs):
    """
    Sum over observations of ln sum_k pi_k N(x_t | mu_k, theta_k^2 + s_t^2).

    ``obs`` is a sequence of NoisyObservation1D or a (logits, variances)
    pair of arrays.
    """
    logits, variances = stack_observations_1d(obs)
    return _marginal_loglik(
        logits[:, np.newaxis], variances[:, np.newaxis, np.newaxis],
        prior.weights, prior.means_array, prior.covariances_array
    )


def marginal_loglik_2d(prior, obs):
    """Bivariate analogue of :func:`marginal_loglik_1d`."""
    logits, covs = stack_observations_2d(obs)
    return _marginal_loglik(
        logits, covs,
        prior.weights, prior.means_array, prior.covariances_array
    )


# =============================================================================
# EXTREME DECONVOLUTION
# =============================================================================


class FitConfig(object):
    """Settings for the deconvolution EM."""

    def __init__(self, n_components,
                 max_iterations=const.default_max_iterations,
                 loglik_tolerance=const.default_loglik_tolerance,
                 restarts=const.default_restarts,
                 rng_seed=None):
        if int(n_components) < 1:
            raise ValueError("n_components must be >= 1, got %s"
                             % n_components)
        if int(max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1, got %s"
                             % max_iterations)
        if not loglik_tolerance > 0:
            raise ValueError("loglik_tolerance must be > 0, got %s"
                             % loglik_tolerance)
        if int(restarts) < 1:
            raise ValueError("restarts must be >= 1, got %s" % restarts)
        self.n_components = int(n_components)
        self.max_iterations = int(max_iterations)
        self.loglik_tolerance = float(loglik_tolerance)
        self.restarts = int(restarts)
        self.rng_seed = rng_seed

    def with_seed(self, rng_seed):
        """Copy of these settings drawing restarts from ``rng_seed``."""
        return FitConfig(self.n_components, self.max_iterations,
                         self.loglik_tolerance, self.restarts, rng_seed)

    def __repr__(self):
        return ('FitConfig(n_components=%d, max_iterations=%d, '
                'loglik_tolerance=%g, restarts=%d, rng_seed=%r)'
                % (self.n_components, self.max_iterations,
                   self.loglik_tolerance, self.restarts, self.rng_seed))


class FitDiagnostics(object):
    """Trace and degeneracy record of a deconvolution fit."""

    def __init__(self, loglik_trace, converged, restart,
                 n_pruned=0, n_floored=0):
        self.loglik_trace = list(loglik_trace)
        self.converged = converged
        self.restart = restart
        self.n_pruned = n_pruned
        self.n_floored = n_floored

    @property
    def n_iterations(self):
        return len(self.loglik_trace) - 1

    @property
    def final_loglik(self):
        return self.loglik_trace[-1]

    @property
    def flags(self):
        res = []
        if self.n_floored:
            res.append('variance_floor')
        if self.n_pruned:
            res.append('pruned')
        return res

    def __repr__(self):
        return ('FitDiagnostics(n_iterations=%d, converged=%s, '
                'final_loglik=%.6f, flags=%s)'
                % (self.n_iterations, self.converged,
                   self.final_loglik, self.flags))


def em_step(X, S, weights, means, covs):
    """
    One deconvolution EM step.

    Returns
    -------
    loglik : float
        Marginal log-likelihood at the *input* parameters.
    log_resp : ndarray
        (N, K) log responsibilities at the input parameters.
    weights, means, covs : ndarray
        Updated parameters, before flooring and pruning.
    """
    log_joint, Tinv, delta = _log_joint(X, S, weights, means, covs)
    lse = logsumexp(log_joint, axis=1)
    log_resp = log_joint - lse[:, np.newaxis]
    resp = np.exp(log_resp)

    gain = np.matmul(covs[np.newaxis], Tinv)
    b = means[np.newaxis] + np.einsum('nkij,nkj->nki', gain, delta)
    B = covs[np.newaxis] - np.matmul(gain, covs[np.newaxis])

    Nk = resp.sum(axis=0)
    new_weights = Nk/len(X)
    with np.errstate(invalid='ignore', divide='ignore'):
        new_means = np.einsum('nk,nki->ki', resp, b)/Nk[:, np.newaxis]
        d = b - new_means[np.newaxis]
        new_covs = (
            np.einsum('nk,nki,nkj->kij', resp, d, d)
            + np.einsum('nk,nkij->kij', resp, B)
        )/Nk[:, np.newaxis, np.newaxis]
    new_covs = 0.5*(new_covs + np.swapaxes(new_covs, 1, 2))
    return float(lse.sum()), log_resp, new_weights, new_means, new_covs


def _floor_covariances(covs, floor=const.variance_floor):
    """Lift the smallest eigenvalue of each covariance to ``floor``."""
    D = covs.shape[-1]
    if D == 1:
        low = covs[:, 0, 0] < floor
        covs[low, 0, 0] = floor
        return int(np.sum(low))
    half_tr = 0.5*(covs[:, 0, 0] + covs[:, 1, 1])
    det = covs[:, 0, 0]*covs[:, 1, 1] - covs[:, 0, 1]*covs[:, 1, 0]
    min_eig = half_tr - np.sqrt(np.maximum(half_tr**2 - det, 0.))
    low = min_eig < floor
    if np.any(low):
        covs[low] += ((floor - min_eig[low])[:, np.newaxis, np.newaxis]
                      * np.eye(D))
    return int(np.sum(low))


def _prune(weights, means, covs, floor=const.weight_floor):
    keep = weights >= floor
    n_pruned = int(np.sum(~keep))
    if n_pruned:
        weights = weights[keep]
        means = means[keep]
        covs = covs[keep]
    return weights/weights.sum(), means, covs, n_pruned


def _initial_params(X, K, rng, restart):
    """Quantile-spread means, global covariance, uniform weights."""
    N, D = X.shape
    order = np.argsort(X[:, 0], kind='stable')
    if restart == 0:
        levels = (np.arange(K) + 0.5)/K
    else:
        levels = np.sort(rng.uniform(size=K))
    idx = order[np.minimum((levels*N).astype(int), N - 1)]
    means = X[idx].copy()
    cov0 = np.cov(X, rowvar=False, bias=True).reshape(D, D)
    covs = np.tile(cov0, (K, 1, 1))
    _floor_covariances(covs)
    weights = np.full(K, 1./K)
    return weights, means, covs


def _run_em(X, S, weights, means, covs, config, restart):
    N = len(X)
    trace = []
    converged = False
    n_pruned = 0
    n_floored = 0
    for _ in range(config.max_iterations):
        loglik, _, new_w, new_m, new_c = em_step(X, S, weights, means, covs)
        trace.append(loglik)
        if len(trace) > 1 \
                and trace[-1] - trace[-2] < config.loglik_tolerance*N:
            converged = True
            break
        new_w, new_m, new_c, pruned = _prune(new_w, new_m, new_c)
        n_pruned += pruned
        n_floored += _floor_covariances(new_c)
        weights, means, covs = new_w, new_m, new_c
    else:
        trace.append(_marginal_loglik(X, S, weights, means, covs))
    diag = FitDiagnostics(trace, converged, restart,
                          n_pruned=n_pruned, n_floored=n_floored)
    return weights, means, covs, diag


def xdgmm_fit(X, S, config):
    """
    Deconvolve a mixture from (N, D) observations with (N, D, D) noise.

    Runs ``config.restarts`` EM passes and keeps the one with the largest
    final marginal log-likelihood.

    Returns
    -------
    weights, means, covs : ndarray
    diagnostics : FitDiagnostics
    """
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    N = len(X)
    K = config.n_components
    if N < K:
        raise FitError("need at least %d observations for %d components, "
                       "got %d" % (K, K, N))
    rng = np.random.default_rng(config.rng_seed)
    best = None
    for restart in range(config.restarts):
        w0, m0, c0 = _initial_params(X, K, rng, restart)
        res = _run_em(X, S, w0, m0, c0, config, restart)
        if not np.isfinite(res[3].final_loglik):
            logger.warning("restart %d diverged", restart)
            continue
        if best is None or res[3].final_loglik > best[3].final_loglik:
            best = res
    if best is None:
        raise FitError("all %d restarts diverged" % config.restarts)
    diag = best[3]
    if diag.flags:
        logger.warning("deconvolution fit degenerate: %s", diag)
    else:
        logger.debug("deconvolution fit: %s", diag)
    return best


def xdgmm_fit_1d(obs, config):
    """
    Recover a logit-CTR mixture prior from noisy observations.

    Parameters
    ----------
    obs : sequence of NoisyObservation1D or (logits, variances)
    config : FitConfig

    Returns
    -------
    GmmPrior1D
        With a :class:`FitDiagnostics` attached as ``diagnostics``.
    """
    logits, variances = stack_observations_1d(obs)
    w, m, c, diag = xdgmm_fit(
        logits[:, np.newaxis], variances[:, np.newaxis, np.newaxis], config
    )
    return GmmPrior1D._from_arrays(w, m, c, diagnostics=diag)


def xdgmm_fit_2d(obs, config):
    """Bivariate analogue of :func:`xdgmm_fit_1d`."""
    logits, covs = stack_observations_2d(obs)
    w, m, c, diag = xdgmm_fit(logits, covs, config)
    return GmmPrior2D._from_arrays(w, m, c, diagnostics=diag)


# =============================================================================
# SAMPLING
# =============================================================================


def _sample(prior, n, seed, return_labels):
    n = int(n)
    if n < 1:
        raise ValueError("need n >= 1, got %d" % n)
    rng = np.random.default_rng(seed)
    labels = rng.choice(prior.n_components, size=n, p=prior.weights)
    z = rng.standard_normal((n, prior.dim))
    chol = np.linalg.cholesky(prior.covariances_array)
    x = prior.means_array[labels] + np.einsum('nij,nj->ni', chol[labels], z)
    return x, labels


def sample_prior_1d(prior, n, seed=None, return_labels=False):
    """Draw n logits from a univariate mixture prior."""
    x, labels = _sample(prior, n, seed, return_labels)
    if return_labels:
        return x[:, 0], labels
    return x[:, 0]


def sample_prior_2d(prior, n, seed=None, return_labels=False):
    """Draw n (logit-CTR, logit-CVR) pairs from a bivariate mixture."""
    x, labels = _sample(prior, n, seed, return_labels)
    if return_labels:
        return x, labels
    return x


# =============================================================================
# SERIALIZATION
# =============================================================================

_prior_fmt = '%.17g'


def save_prior(prior, fname):
    """
    Write a prior as a whitespace-delimited table.

    The first header line is ``K <K> dim <D>``; each row holds the weight,
    the D mean entries and the upper triangle of the covariance.
    """
    D = prior.dim
    iu = np.triu_indices(D)
    rows = np.column_stack([
        prior.weights,
        prior.means_array,
        prior.covariances_array[:, iu[0], iu[1]],
    ])
    cols = ['weight'] + ['mean[%d]' % i for i in range(D)] \
        + ['cov[%d,%d]' % ij for ij in zip(*iu)]
    header = 'K %d dim %d\n%s' % (prior.n_components, D, '  '.join(cols))
    np.savetxt(fname, rows, fmt=_prior_fmt, delimiter='  ', header=header)


def load_prior(fname):
    """Read a prior written by :func:`save_prior`."""
    with open(fname, 'r') as f:
        first = f.readline()
    tokens = first.lstrip('#').split()
    try:
        K = int(tokens[1])
        D = int(tokens[3])
    except (IndexError, ValueError):
        raise ValueError("'%s' is not a prior file (bad header '%s')"
                         % (fname, first.strip()))
    rows = np.loadtxt(fname, ndmin=2)
    if rows.shape != (K, 1 + D + D*(D + 1)//2):
        raise ValueError("'%s': expected %d rows for dim %d, got shape %s"
                         % (fname, K, D, rows.shape))
    weights = rows[:, 0]
    means = rows[:, 1:1 + D]
    covs = np.zeros((K, D, D))
    iu = np.triu_indices(D)
    covs[:, iu[0], iu[1]] = rows[:, 1 + D:]
    covs[:, iu[1], iu[0]] = rows[:, 1 + D:]
    weights = weights/weights.sum()
    if D == 1:
        return GmmPrior1D(weights, means[:, 0], covs[:, 0, 0])
    elif D == 2:
        return GmmPrior2D(weights, means, covs)
    raise ValueError("'%s': unsupported dimension %d" % (fname, D))
