# -*- coding: utf-8 -*-
"""
Numerical kernels for logit-space Gaussian computations.

Every public operation comes in two flavours:

* a scalar form working on :class:`Gaussian1D` / :class:`Gaussian2D`
  objects, validating its arguments and raising :class:`DomainError`;
* an array form (``*_arrays`` / :func:`probit_expectation`) that broadcasts
  over leading axes and is what the posterior and fitting code call in
  bulk.  The array forms accept the zero-variance limits that the scalar
  forms reject.

Quadrature grids use the physicists' Gauss-Hermite nodes ``a_i`` with the
weights divided by sqrt(pi), so that for ``x ~ N(mu, s^2)``::

    E[f(x)] ~= sum_i w_i f(mu + sqrt(2) s a_i),    sum_i w_i = 1

and in two dimensions the nodes are ``mu + sqrt(2) L (a_i, a_j)`` with
``L L^T = Sigma`` and weights ``w_i w_j``.
"""
import functools

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import special
from scipy.stats import norm

from denoisebid import constants as const


class DomainError(ValueError):
    """Argument lies outside the domain of a numerical kernel."""


# =============================================================================
# TYPES
# =============================================================================


class Gaussian1D(object):
    """Univariate Gaussian in logit units.

    A zero variance is accepted as the point-mass limit; kernels that need
    a proper density (:func:`gaussian_product_1d`) reject it.
    """

    __slots__ = ('_mean', '_variance')

    def __init__(self, mean, variance):
        mean = float(mean)
        variance = float(variance)
        if not np.isfinite(mean):
            raise DomainError("mean must be finite, got %s" % mean)
        if not np.isfinite(variance) or variance < 0:
            raise DomainError(
                "variance must be finite and >= 0, got %s" % variance
            )
        self._mean = mean
        self._variance = variance

    @property
    def mean(self):
        return self._mean

    @property
    def variance(self):
        return self._variance

    @property
    def std(self):
        return np.sqrt(self._variance)

    def __repr__(self):
        return 'Gaussian1D(mean=%r, variance=%r)' % (self._mean,
                                                      self._variance)

    def __eq__(self, other):
        if not isinstance(other, Gaussian1D):
            return NotImplemented
        return (self._mean, self._variance) == (other.mean, other.variance)


class Gaussian2D(object):
    """Bivariate Gaussian over (logit-CTR, logit-CVR)."""

    __slots__ = ('_mean', '_covariance')

    def __init__(self, mean, covariance):
        mean = np.array(mean, dtype=float).reshape(2)
        covariance = np.array(covariance, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(mean)):
            raise DomainError("mean must be finite, got %s" % mean)
        check_positive_definite(covariance)
        # store the exactly symmetric part
        covariance = 0.5*(covariance + covariance.T)
        mean.flags.writeable = False
        covariance.flags.writeable = False
        self._mean = mean
        self._covariance = covariance

    @property
    def mean(self):
        return self._mean

    @property
    def covariance(self):
        return self._covariance

    def marginal(self, axis):
        """Return the univariate marginal along ``axis`` (0=CTR, 1=CVR)."""
        return Gaussian1D(self._mean[axis], self._covariance[axis, axis])

    def __repr__(self):
        return 'Gaussian2D(mean=%r, covariance=%r)' % (
            self._mean.tolist(), self._covariance.tolist()
        )


class QuadratureGrid(object):
    """Normalized Gauss-Hermite rule of order M."""

    def __init__(self, order, nodes, weights):
        nodes = np.array(nodes, dtype=float)
        weights = np.array(weights, dtype=float)
        if nodes.shape != (order, ) or weights.shape != (order, ):
            raise DomainError(
                "need %d nodes and weights, got %d and %d"
                % (order, len(nodes), len(weights))
            )
        if np.any(weights <= 0):
            raise DomainError("quadrature weights must be positive")
        if abs(weights.sum() - 1.) > 1e-12:
            raise DomainError(
                "quadrature weights must sum to 1, got %.16g" % weights.sum()
            )
        nodes.flags.writeable = False
        weights.flags.writeable = False
        self._order = order
        self._nodes = nodes
        self._weights = weights

        # tensor product rule for the bivariate case
        a0, a1 = np.meshgrid(nodes, nodes, indexing='ij')
        tnodes = np.column_stack([a0.ravel(), a1.ravel()])
        tweights = np.outer(weights, weights).ravel()
        tnodes.flags.writeable = False
        tweights.flags.writeable = False
        self._tensor_nodes = tnodes
        self._tensor_weights = tweights

    @property
    def order(self):
        return self._order

    @property
    def nodes(self):
        """physicists' nodes a_i"""
        return self._nodes

    @property
    def weights(self):
        """weights normalized to sum to one"""
        return self._weights

    @property
    def standard_nodes(self):
        """nodes for integration against N(0, 1)"""
        return const.sqrt2*self._nodes

    @property
    def tensor_nodes(self):
        """(M**2, 2) array of node pairs (a_i, a_j)"""
        return self._tensor_nodes

    @property
    def tensor_weights(self):
        return self._tensor_weights

    def expect(self, func, mean=0., variance=1.):
        """Approximate E[func(x)] for x ~ N(mean, variance)."""
        x = mean + np.sqrt(variance)*self.standard_nodes
        return float(np.dot(self._weights, func(x)))

    def __repr__(self):
        return 'QuadratureGrid(order=%d)' % self._order


# =============================================================================
# LINK FUNCTIONS
# =============================================================================


def sigmoid(x):
    """Logistic function; saturates without overflow for large |x|."""
    return special.expit(x)


def logit(p):
    """Log-odds ln(p/(1-p)) for p strictly inside (0, 1)."""
    parr = np.asarray(p, dtype=float)
    if np.any(~(parr > 0.)) or np.any(~(parr < 1.)):
        raise DomainError("logit requires 0 < p < 1, got %s" % p)
    return special.logit(p)


# =============================================================================
# DENSITIES AND POSITIVE DEFINITENESS
# =============================================================================


def is_positive_definite(cov, tol=const.pd_tol):
    """Elementwise positive-definiteness test for (..., 2, 2) arrays.

    Uses trace > 0 and det > tol*(trace/2)**2, i.e. the eigenvalue ratio
    is bounded away from zero irrespective of scale.
    """
    cov = np.asarray(cov, dtype=float)
    trace = cov[..., 0, 0] + cov[..., 1, 1]
    det = cov[..., 0, 0]*cov[..., 1, 1] - cov[..., 0, 1]*cov[..., 1, 0]
    return np.logical_and(trace > 0., det > tol*(0.5*trace)**2)


def check_positive_definite(cov, name='covariance'):
    """Raise DomainError unless cov is a finite symmetric PD 2x2 matrix."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or not np.all(np.isfinite(cov)):
        raise DomainError("%s must be a finite 2x2 matrix" % name)
    scale = max(np.max(np.abs(cov)), const.epsf)
    if abs(cov[0, 1] - cov[1, 0]) > const.pd_tol*scale:
        raise DomainError("%s must be symmetric, got %s" % (name, cov))
    if not is_positive_definite(cov):
        raise DomainError(
            "%s must be positive definite, got %s" % (name, cov.tolist())
        )


def inv_2x2(cov):
    """Closed-form inverse and determinant of (..., 2, 2) arrays."""
    cov = np.asarray(cov, dtype=float)
    a = cov[..., 0, 0]
    b = cov[..., 0, 1]
    c = cov[..., 1, 0]
    d = cov[..., 1, 1]
    det = a*d - b*c
    inv = np.empty_like(cov)
    inv[..., 0, 0] = d/det
    inv[..., 0, 1] = -b/det
    inv[..., 1, 0] = -c/det
    inv[..., 1, 1] = a/det
    return inv, det


def normal_logpdf_1d(x, mean, variance):
    """log N(x | mean, variance), broadcasting."""
    return norm.logpdf(x, loc=mean, scale=np.sqrt(variance))


def normal_logpdf_2d(x, mean, cov):
    """log N(x | mean, cov) for (..., 2) points and (..., 2, 2) covariances."""
    inv, det = inv_2x2(cov)
    delta = np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)
    quad = np.einsum('...i,...ij,...j->...', delta, inv, delta)
    return -0.5*(quad + np.log(det)) - const.log_2pi


# =============================================================================
# GAUSSIAN PRODUCTS
# =============================================================================


def gaussian_product_1d_arrays(center, lik_var, mean, variance):
    """Scaled-Gaussian reduction N(center|x, lik_var) N(x|mean, variance).

    Returns ``(log_alpha, post_mean, post_var)`` where
    ``alpha = N(center | mean, lik_var + variance)``.  The posterior
    parameters are written in the form that stays finite for
    ``lik_var == 0``; they equal 1/(1/lik_var + 1/variance) and
    post_var*(center/lik_var + mean/variance).
    """
    center = np.asarray(center, dtype=float)
    lik_var = np.asarray(lik_var, dtype=float)
    total = lik_var + variance
    log_alpha = normal_logpdf_1d(center, mean, total)
    post_var = lik_var*variance/total
    post_mean = (center*variance + mean*lik_var)/total
    return log_alpha, post_mean, post_var


def gaussian_product_1d(likelihood_center, likelihood_var, prior):
    """
    Reduce the product of a Gaussian likelihood and a Gaussian prior.

    Parameters
    ----------
    likelihood_center : float
        The observed logit.
    likelihood_var : float
        Observation noise variance, > 0.
    prior : Gaussian1D
        Prior component, variance > 0.

    Returns
    -------
    alpha : float
        Evidence N(likelihood_center | prior.mean,
        likelihood_var + prior.variance).
    posterior : Gaussian1D
        Normalized product density.
    """
    if not likelihood_var > 0:
        raise DomainError(
            "likelihood variance must be > 0, got %s" % likelihood_var
        )
    if not prior.variance > 0:
        raise DomainError(
            "prior variance must be > 0, got %s" % prior.variance
        )
    log_alpha, pmean, pvar = gaussian_product_1d_arrays(
        likelihood_center, likelihood_var, prior.mean, prior.variance
    )
    return float(np.exp(log_alpha)), Gaussian1D(pmean, pvar)


def gaussian_product_2d_arrays(center, lik_cov, mean, cov):
    """Bivariate analogue of :func:`gaussian_product_1d_arrays`.

    Uses gain = cov (cov + lik_cov)^-1, so that
    post_cov = gain lik_cov = (lik_cov^-1 + cov^-1)^-1 and
    post_mean = mean + gain (center - mean); both stay finite for a
    vanishing ``lik_cov``.
    """
    center = np.asarray(center, dtype=float)
    lik_cov = np.asarray(lik_cov, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    total = lik_cov + cov
    total_inv, _ = inv_2x2(total)
    gain = np.matmul(cov, total_inv)
    post_mean = mean + np.einsum('...ij,...j->...i', gain, center - mean)
    post_cov = np.matmul(gain, lik_cov)
    post_cov = 0.5*(post_cov + np.swapaxes(post_cov, -1, -2))
    log_alpha = normal_logpdf_2d(center, mean, total)
    return log_alpha, post_mean, post_cov


def gaussian_product_2d(likelihood_center, likelihood_cov, prior):
    """
    Reduce N(center | eta, likelihood_cov) N(eta | prior) to
    alpha * N(eta | posterior).

    Both covariances must be positive definite.
    """
    check_positive_definite(likelihood_cov, name='likelihood covariance')
    center = np.array(likelihood_center, dtype=float).reshape(2)
    log_alpha, pmean, pcov = gaussian_product_2d_arrays(
        center, likelihood_cov, prior.mean, prior.covariance
    )
    return float(np.exp(log_alpha)), Gaussian2D(pmean, pcov)


# =============================================================================
# SIGMOID-GAUSSIAN EXPECTATIONS
# =============================================================================


def probit_expectation(mean, variance):
    """E[sigmoid(x)], x ~ N(mean, variance), via the probit approximation."""
    return special.expit(
        mean/np.sqrt(1. + const.probit_factor*np.asarray(variance))
    )


def probit_sigmoid_gaussian(g):
    """Probit approximation of the sigmoid-Gaussian integral for g."""
    return float(probit_expectation(g.mean, g.variance))


def cholesky_2x2_arrays(cov):
    """Closed-form lower Cholesky factor of (..., 2, 2) PD arrays."""
    cov = np.asarray(cov, dtype=float)
    s1 = cov[..., 0, 0]
    s0 = cov[..., 1, 0]
    s2 = cov[..., 1, 1]
    l00 = np.sqrt(s1)
    chol = np.zeros_like(cov)
    chol[..., 0, 0] = l00
    chol[..., 1, 0] = s0/l00
    chol[..., 1, 1] = np.sqrt(s2 - s0**2/s1)
    return chol


def cholesky_2x2(cov):
    """
    Lower-triangular L with L L^T = cov for a 2x2 PD matrix.

    L = [[sqrt(s1), 0], [s0/sqrt(s1), sqrt(s2 - s0**2/s1)]]
    for cov = [[s1, s0], [s0, s2]].
    """
    check_positive_definite(cov)
    return cholesky_2x2_arrays(cov)


def regularize_covariance(cov):
    """Add the jitter to entries of a (..., 2, 2) stack that are not PD.

    Raises DomainError if any entry is still not PD afterwards.
    """
    cov = np.array(cov, dtype=float)
    bad = ~is_positive_definite(cov)
    if np.any(bad):
        cov[bad] = cov[bad] + const.pd_jitter*const.identity_2x2
        if not np.all(is_positive_definite(cov[bad])):
            raise DomainError(
                "covariance not positive definite after regularization"
            )
    return cov


@functools.lru_cache(maxsize=None)
def gh_grid(order):
    """
    Normalized Gauss-Hermite grid of the given order, 1 <= order <= 20.

    The rule integrates polynomials up to degree 2*order - 1 exactly
    against the standard normal.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise DomainError("quadrature order must be an integer, got %r"
                          % (order, ))
    if order < const.min_quadrature_order \
            or order > const.max_quadrature_order:
        raise DomainError(
            "quadrature order must be in [%d, %d], got %d"
            % (const.min_quadrature_order, const.max_quadrature_order, order)
        )
    nodes, weights = hermgauss(int(order))
    weights = weights/weights.sum()
    # hermgauss nodes are symmetric up to rounding; enforce it exactly
    nodes = 0.5*(nodes - nodes[::-1])
    return QuadratureGrid(int(order), nodes, weights)


def gh_sigmoid_product_arrays(mean, cov, grid):
    """E[sigmoid(xi) sigmoid(zeta)] for stacks of bivariate Gaussians.

    ``mean`` is (..., 2) and ``cov`` (..., 2, 2); near-singular covariances
    are regularized before factorization.
    """
    mean = np.asarray(mean, dtype=float)
    chol = cholesky_2x2_arrays(regularize_covariance(cov))
    offsets = const.sqrt2*np.einsum(
        '...ij,mj->...mi', chol, grid.tensor_nodes
    )
    eta = mean[..., np.newaxis, :] + offsets
    vals = special.expit(eta[..., 0])*special.expit(eta[..., 1])
    return np.dot(vals, grid.tensor_weights)


def gh_sigmoid_product(g, grid):
    """Gauss-Hermite approximation of E[sigmoid(xi) sigmoid(zeta)] under g."""
    chol = cholesky_2x2(g.covariance)
    offsets = const.sqrt2*np.dot(grid.tensor_nodes, chol.T)
    eta = g.mean + offsets
    vals = special.expit(eta[:, 0])*special.expit(eta[:, 1])
    return float(np.dot(vals, grid.tensor_weights))
