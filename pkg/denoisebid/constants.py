# -*- coding: utf-8 -*-
"""Numerical constants and experiment defaults shared across denoisebid."""
import numpy as np

# pi related
pi = np.pi
sqrt2 = np.sqrt(2.)
log_2pi = np.log(2*pi)

# probit approximation of the sigmoid-Gaussian convolution
probit_factor = pi / 8.

# tolerancing
epsf = np.finfo(float).eps      # ~2.2e-16
sqrt_epsf = np.sqrt(epsf)       # ~1.5e-8

pd_tol = 1e-12                  # det/trace threshold for positive definiteness
pd_jitter = 1e-10               # added to near-singular covariances
variance_floor = 1e-6           # logit^2 units
weight_floor = 1e-8             # mixture components below this are pruned

identity_2x2 = np.eye(2)

# quadrature
default_quadrature_order = 5
min_quadrature_order = 1
max_quadrature_order = 20

# extreme deconvolution fit settings
default_max_iterations = 300
default_loglik_tolerance = 2.0e-5
default_restarts = 3
default_subsample = 400

# relative campaign constraints
default_k_budget = 0.2
default_k_cpc = 0.2
default_bid_cap_factor = 10.

# synthetic campaigns
default_n_campaigns = 200
default_n_auctions = 1000
default_wp_sigma = 1.0
default_wp_median_price = 100.

# generating mixtures for logit-CTR and logit-CVR: (weights, means, sigmas)
synthetic_ctr_prior = dict(
    weights=[0.6, 0.2, 0.2],
    means=[-3.0, -2.5, -1.0],
    sigmas=[0.3, 0.3, 0.4],
)
synthetic_cvr_prior = dict(
    weights=[0.6, 0.4],
    means=[-2.0, -1.0],
    sigmas=[0.7, 0.4],
)

# noise sweep grid, log-spaced standard deviations in logit units
default_sigma_grid = dict(start=1e-2, stop=1e1, num=9)


def _readenv(name, ctor, default):
    try:
        import os
        res = os.environ[name]
        del os
    except KeyError:
        del os
        return default
    else:
        try:
            return ctor(res)
        except ValueError:
            import warnings
            warnings.warn("environ %s defined but failed to parse '%s'" %
                          (name, res), RuntimeWarning)
            del warnings
            return default


# 0 = do NOT use numba
# 1 = use numba (default)
USE_NUMBA = _readenv("DENOISEBID_USE_NUMBA", int, 1)
if USE_NUMBA:
    try:
        import numba
    except ImportError:
        print("*** Numba not available, replay may run slower ***")
        USE_NUMBA = False

del _readenv
