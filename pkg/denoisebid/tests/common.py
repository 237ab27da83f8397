"""Independent reference computations shared by the test suites"""
import itertools
import os
import unittest

import numpy as np
from scipy import integrate
from scipy.special import expit
from scipy.stats import multivariate_normal, norm

from denoisebid import constants as const
from denoisebid.priors import GmmPrior1D, GmmPrior2D


long_tests = unittest.skipUnless(
    os.environ.get('DENOISEBID_LONG_TESTS', '0') == '1',
    'set DENOISEBID_LONG_TESTS=1 to run'
)


def ctr_prior():
    return GmmPrior1D.from_sigmas(**const.synthetic_ctr_prior)


def cvr_prior():
    return GmmPrior1D.from_sigmas(**const.synthetic_cvr_prior)


def correlated_prior(rho=0.5):
    """Two bivariate components with correlation ``rho``."""
    covs = []
    for s0, s1 in ((0.4, 0.6), (0.5, 0.3)):
        covs.append([[s0**2, rho*s0*s1], [rho*s0*s1, s1**2]])
    return GmmPrior2D([0.7, 0.3], [[-2.5, -1.8], [-1.2, -0.8]], covs)


def random_prior_1d(rng, K=None):
    """Mixture with means in [-6, 2] and standard deviations in [0.2, 1.5]."""
    if K is None:
        K = rng.integers(1, 4)
    weights = rng.dirichlet(np.ones(K))
    weights = np.maximum(weights, 1e-3)
    weights /= weights.sum()
    return GmmPrior1D.from_sigmas(
        weights, rng.uniform(-6, 2, K), rng.uniform(0.2, 1.5, K)
    )


def random_prior_2d(rng, K=None):
    if K is None:
        K = rng.integers(1, 3)
    weights = rng.dirichlet(np.ones(K))
    weights = np.maximum(weights, 1e-3)
    weights /= weights.sum()
    means = np.column_stack([rng.uniform(-4, 0, K), rng.uniform(-3, 0, K)])
    covs = []
    for _ in range(K):
        s = rng.uniform(0.2, 1.0, 2)
        rho = rng.uniform(-0.6, 0.6)
        covs.append([[s[0]**2, rho*s[0]*s[1]], [rho*s[0]*s[1], s[1]**2]])
    return GmmPrior2D(weights, means, covs)


# =============================================================================
# GRID BAYES
# =============================================================================


def prior_density_1d(prior, x):
    return sum(w*norm.pdf(x, m, np.sqrt(v))
               for w, m, v in zip(prior.weights, prior.means, prior.variances))


def grid_bayes_ctr_1d(xhat, noise_var, prior, n=20001):
    """E[sigmoid(xi) | xhat] by trapezoid integration of prior x likelihood."""
    sd = np.sqrt(prior.variances).max()
    lo = prior.means.min() - 10*sd
    hi = prior.means.max() + 10*sd
    s = np.sqrt(noise_var)
    lo = max(lo, xhat - 10*s)
    hi = min(hi, xhat + 10*s)
    xi = np.linspace(lo, hi, n)
    post = prior_density_1d(prior, xi)*norm.pdf(xhat, xi, s)
    return integrate.trapezoid(post*expit(xi), xi) \
        / integrate.trapezoid(post, xi)


def _prior_density_2d(prior, pts):
    return sum(
        w*multivariate_normal(m, c).pdf(pts)
        for w, m, c in zip(prior.weights, prior.means, prior.covariances)
    )


def grid_bayes_joint(etahat, noise_cov, prior, n=401):
    """(E[sigmoid(xi)], E[sigmoid(xi) sigmoid(zeta)]) on a dense 2D grid."""
    etahat = np.asarray(etahat, dtype=float)
    noise_cov = np.asarray(noise_cov, dtype=float)
    sd = np.sqrt(prior.covariances[:, [0, 1], [0, 1]]).max(axis=0)
    axes = []
    for i in range(2):
        lo = prior.means[:, i].min() - 9*sd[i]
        hi = prior.means[:, i].max() + 9*sd[i]
        s = np.sqrt(noise_cov[i, i])
        axes.append(np.linspace(max(lo, etahat[i] - 9*s),
                                min(hi, etahat[i] + 9*s), n))
    xi, zeta = np.meshgrid(*axes, indexing='ij')
    pts = np.stack([xi, zeta], axis=-1)
    post = _prior_density_2d(prior, pts) \
        * multivariate_normal(etahat, noise_cov).pdf(pts)

    def integral(f):
        return integrate.trapezoid(
            integrate.trapezoid(f, axes[1], axis=1), axes[0]
        )

    z = integral(post)
    ctr = integral(post*expit(xi))/z
    value = integral(post*expit(xi)*expit(zeta))/z
    return ctr, value


def dense_sigmoid_product(mean, cov, n=401, width=9.):
    """E[sigmoid(xi) sigmoid(zeta)] under N(mean, cov) on a dense grid."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    sd = np.sqrt(np.diag(cov))
    axes = [np.linspace(mean[i] - width*sd[i], mean[i] + width*sd[i], n)
            for i in range(2)]
    xi, zeta = np.meshgrid(*axes, indexing='ij')
    pdf = multivariate_normal(mean, cov).pdf(np.stack([xi, zeta], axis=-1))
    f = pdf*expit(xi)*expit(zeta)
    num = integrate.trapezoid(integrate.trapezoid(f, axes[1], axis=1),
                              axes[0])
    den = integrate.trapezoid(integrate.trapezoid(pdf, axes[1], axis=1),
                              axes[0])
    return num/den


def quad_sigmoid_gaussian(mean, variance):
    """E[sigmoid(x)], x ~ N(mean, variance), by adaptive quadrature."""
    s = np.sqrt(variance)
    val, _ = integrate.quad(
        lambda x: expit(x)*norm.pdf(x, mean, s), mean - 12*s, mean + 12*s,
        limit=200
    )
    return val


# =============================================================================
# LP ORACLE
# =============================================================================


def lp_oracle(inputs, constraints):
    """
    Minimum of the dual g(p, q) over p, q >= 0 by enumerating the vertices
    of the line arrangement {reduced cost_t = 0} with the two axes.
    """
    wp = inputs.wp
    a = inputs.wp - constraints.target_cpc*inputs.click
    v = inputs.value
    # each line: coef_p * p + coef_q * q = rhs
    lines = [(1., 0., 0.), (0., 1., 0.)] \
        + [(wp[t], a[t], v[t]) for t in range(len(wp))]

    def g(p, q):
        rc = v - p*wp - q*a
        return constraints.budget*p + np.sum(np.maximum(rc, 0.))

    best = g(0., 0.)
    for (a1, b1, c1), (a2, b2, c2) in itertools.combinations(lines, 2):
        det = a1*b2 - a2*b1
        if abs(det) < 1e-14:
            continue
        p = (c1*b2 - c2*b1)/det
        q = (a1*c2 - a2*c1)/det
        if p < -1e-12 or q < -1e-12:
            continue
        best = min(best, g(max(p, 0.), max(q, 0.)))
    return best


def random_bid_inputs(rng, T):
    from denoisebid.bidding import BidInputs

    wp = np.exp(rng.normal(np.log(50.), 1.0, T))
    ctr = expit(rng.normal(-2.5, 0.8, T))
    cvr = expit(rng.normal(-1.5, 0.6, T))
    return BidInputs(wp, ctr*cvr, ctr)
