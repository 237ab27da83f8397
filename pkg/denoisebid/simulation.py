# -*- coding: utf-8 -*-
"""
Synthetic campaigns, prediction noise and second-price replay.

A campaign is a column store of per-auction winning prices, true and
predicted click/conversion probabilities and the logit-space noise model
of the predictions.  Replay walks the auctions in order, wins every
auction whose bid reaches the winning price while the budget allows, and
reports expected (or realized) conversions against the oracle optimum.
"""
from collections import namedtuple
import logging

import numpy as np
from scipy.special import expit

from denoisebid import constants as const
from denoisebid.bidding import BidInputs, Constraints, solve_dual
from denoisebid.coremath import logit
from denoisebid.priors import GmmPrior1D, check_noise_covariance, \
    sample_prior_1d

if const.USE_NUMBA:
    import numba

logger = logging.getLogger(__name__)

# probabilities are kept strictly inside (0, 1) so logits stay finite
_p_lo = 1e-12
_p_hi = 1. - 1e-12

AuctionRecord = namedtuple(
    'AuctionRecord',
    ['wp', 'ctr_true', 'cvr_true', 'ctr_hat', 'cvr_hat',
     'var_logit_ctr', 'var_logit_cvr', 'cov_logit', 'click', 'conversion']
)
AuctionRecord.__new__.__defaults__ = (0., 0., 0., np.nan, np.nan)


# =============================================================================
# CAMPAIGNS
# =============================================================================


def _probability_column(arr, name, T, allow_missing=False):
    if arr is None:
        return np.full(T, np.nan)
    arr = np.array(np.broadcast_to(np.asarray(arr, dtype=float), (T,)))
    present = ~np.isnan(arr)
    if not allow_missing and not np.all(present):
        raise ValueError("%s has missing entries" % name)
    if np.any(~((arr[present] > 0) & (arr[present] < 1))):
        raise ValueError("%s must lie in (0, 1)" % name)
    return arr


class Campaign(object):
    """
    Ordered auctions of one campaign.

    True probabilities may be absent (NaN) for ingested logs; predictions
    are always present.  Click and conversion outcomes are optional.
    """

    columns = AuctionRecord._fields

    def __init__(self, campaign_id, wp, ctr_true, cvr_true,
                 ctr_hat=None, cvr_hat=None,
                 var_logit_ctr=0., var_logit_cvr=0., cov_logit=0.,
                 click=None, conversion=None, constraints=None):
        wp = np.array(wp, dtype=float).reshape(-1)
        T = len(wp)
        if T == 0:
            raise ValueError("campaign '%s' has no auctions" % campaign_id)
        if np.any(~(wp > 0)) or np.any(~np.isfinite(wp)):
            raise ValueError("winning prices must be finite and > 0")
        self.campaign_id = str(campaign_id)
        self.wp = wp
        self.ctr_true = _probability_column(ctr_true, 'ctr_true', T, True)
        self.cvr_true = _probability_column(cvr_true, 'cvr_true', T, True)
        self.ctr_hat = self.ctr_true.copy() if ctr_hat is None \
            else _probability_column(ctr_hat, 'ctr_hat', T)
        self.cvr_hat = self.cvr_true.copy() if cvr_hat is None \
            else _probability_column(cvr_hat, 'cvr_hat', T)
        if np.any(np.isnan(self.ctr_hat)) or np.any(np.isnan(self.cvr_hat)):
            raise ValueError("predictions are required for every auction")
        self.var_logit_ctr = np.array(
            np.broadcast_to(np.asarray(var_logit_ctr, float), (T,)))
        self.var_logit_cvr = np.array(
            np.broadcast_to(np.asarray(var_logit_cvr, float), (T,)))
        self.cov_logit = np.array(
            np.broadcast_to(np.asarray(cov_logit, float), (T,)))
        check_noise_covariance(self.noise_covariances)
        self.click = np.full(T, np.nan) if click is None \
            else np.array(np.broadcast_to(np.asarray(click, float), (T,)))
        self.conversion = np.full(T, np.nan) if conversion is None \
            else np.array(
                np.broadcast_to(np.asarray(conversion, float), (T,)))
        self.constraints = constraints
        self._r_star = {}

    def __len__(self):
        return len(self.wp)

    def __getitem__(self, t):
        return AuctionRecord(*[getattr(self, c)[t] for c in self.columns])

    def __iter__(self):
        for t in range(len(self)):
            yield self[t]

    def __repr__(self):
        return 'Campaign(%s, T=%d, %s)' % (
            self.campaign_id, len(self), self.constraints)

    @classmethod
    def from_records(cls, campaign_id, records, constraints=None):
        records = list(records)
        if not records:
            raise ValueError("campaign '%s' has no auctions" % campaign_id)
        cols = dict(zip(AuctionRecord._fields, zip(*records)))
        return cls(campaign_id, constraints=constraints, **cols)

    @property
    def has_truth(self):
        return not (np.any(np.isnan(self.ctr_true))
                    or np.any(np.isnan(self.cvr_true)))

    @property
    def has_outcomes(self):
        return not (np.any(np.isnan(self.click))
                    or np.any(np.isnan(self.conversion)))

    @property
    def logits_hat(self):
        """(T, 2) predicted (logit-CTR, logit-CVR)"""
        return np.column_stack([logit(self.ctr_hat), logit(self.cvr_hat)])

    @property
    def noise_covariances(self):
        """(T, 2, 2) logit noise covariances"""
        covs = np.empty((len(self), 2, 2))
        covs[:, 0, 0] = self.var_logit_ctr
        covs[:, 1, 1] = self.var_logit_cvr
        covs[:, 0, 1] = covs[:, 1, 0] = self.cov_logit
        return covs

    def _copy_with(self, **kwargs):
        args = dict((c, getattr(self, c)) for c in self.columns)
        args['constraints'] = self.constraints
        args.update(kwargs)
        new = Campaign(self.campaign_id, **args)
        if new.constraints == self.constraints:
            new._r_star = self._r_star
        return new

    def with_predictions(self, ctr_hat, cvr_hat, var_logit_ctr=0.,
                         var_logit_cvr=0., cov_logit=0.):
        """Same auctions and truths, new predictions and noise model."""
        return self._copy_with(
            ctr_hat=ctr_hat, cvr_hat=cvr_hat, var_logit_ctr=var_logit_ctr,
            var_logit_cvr=var_logit_cvr, cov_logit=cov_logit
        )

    def with_constraints(self, constraints):
        return self._copy_with(constraints=constraints)


class ConstraintFactors(object):
    """Budget and target CPC as fractions of the campaign's totals."""

    def __init__(self, k_budget=const.default_k_budget,
                 k_cpc=const.default_k_cpc):
        self.k_budget = float(k_budget)
        self.k_cpc = float(k_cpc)
        if not (0 < self.k_budget <= 1 and 0 < self.k_cpc <= 1):
            raise ValueError("constraint factors must lie in (0, 1], got %s"
                             % self)

    def __repr__(self):
        return 'ConstraintFactors(k_budget=%g, k_cpc=%g)' % (
            self.k_budget, self.k_cpc)


def derive_constraints(campaign, factors=None):
    """
    B = k_B sum wp_t and C = k_C sum wp_t / sum CTR_t.

    Uses the true CTRs when the campaign carries them, otherwise the
    predictions.  Accepts a Campaign or a sequence of AuctionRecord.
    """
    if factors is None:
        factors = ConstraintFactors()
    if not isinstance(campaign, Campaign):
        campaign = Campaign.from_records('records', campaign)
    ctr = campaign.ctr_true if campaign.has_truth else campaign.ctr_hat
    if not campaign.has_truth:
        logger.warning("campaign %s: no true CTR, constraints use "
                       "predictions", campaign.campaign_id)
    total = float(np.sum(campaign.wp))
    return Constraints(
        factors.k_budget*total,
        factors.k_cpc*total/float(np.sum(ctr))
    )


# =============================================================================
# GENERATION
# =============================================================================


class SyntheticParams(object):
    """
    Generating distributions for synthetic campaigns.

    Winning prices are log-normal with median exp(wp_mu); true logits are
    drawn from the CTR and CVR mixtures independently.
    """

    def __init__(self, n_auctions=const.default_n_auctions,
                 wp_mu=None, wp_sigma=const.default_wp_sigma,
                 ctr_prior=None, cvr_prior=None, factors=None):
        self.n_auctions = int(n_auctions)
        if self.n_auctions < 1:
            raise ValueError("n_auctions must be >= 1")
        self.wp_sigma = float(wp_sigma)
        if self.wp_sigma < 0:
            raise ValueError("wp_sigma must be >= 0")
        if wp_mu is None:
            wp_mu = np.log(const.default_wp_median_price) - self.wp_sigma
        self.wp_mu = float(wp_mu)
        if ctr_prior is None:
            ctr_prior = GmmPrior1D.from_sigmas(**const.synthetic_ctr_prior)
        if cvr_prior is None:
            cvr_prior = GmmPrior1D.from_sigmas(**const.synthetic_cvr_prior)
        self.ctr_prior = ctr_prior
        self.cvr_prior = cvr_prior
        self.factors = ConstraintFactors() if factors is None else factors

    def __repr__(self):
        return ('SyntheticParams(T=%d, wp_mu=%g, wp_sigma=%g, %s)'
                % (self.n_auctions, self.wp_mu, self.wp_sigma, self.factors))


def _true_probabilities(params, n, rng):
    ctr = expit(sample_prior_1d(params.ctr_prior, n, seed=rng))
    cvr = expit(sample_prior_1d(params.cvr_prior, n, seed=rng))
    return np.clip(ctr, _p_lo, _p_hi), np.clip(cvr, _p_lo, _p_hi)


def generate_synthetic_campaign(params=None, seed=None, campaign_id=0):
    """Noise-free synthetic campaign with derived constraints."""
    if params is None:
        params = SyntheticParams()
    rng = np.random.default_rng(seed)
    T = params.n_auctions
    wp = np.exp(params.wp_mu + params.wp_sigma*rng.standard_normal(T))
    ctr, cvr = _true_probabilities(params, T, rng)
    campaign = Campaign(campaign_id, wp, ctr, cvr)
    return campaign.with_constraints(
        derive_constraints(campaign, params.factors)
    )


def campaign_from_prices(prices, params=None, seed=None, campaign_id=0):
    """Synthetic campaign over an observed winning-price sequence."""
    if params is None:
        params = SyntheticParams()
    wp = np.asarray(prices, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    ctr, cvr = _true_probabilities(params, len(wp), rng)
    campaign = Campaign(campaign_id, wp, ctr, cvr)
    return campaign.with_constraints(
        derive_constraints(campaign, params.factors)
    )


def inject_noise(campaign, sigma_ctr, sigma_cvr=0., correlation=0.,
                 seed=None):
    """
    Perturb the true logits with Gaussian noise.

    logit CTR_hat = logit CTR + eps_ctr, logit CVR_hat = logit CVR +
    eps_cvr with standard deviations sigma_ctr, sigma_cvr and correlation
    ``correlation``.  A zero standard deviation copies the truth exactly.
    The noise model is recorded on the returned campaign.
    """
    sigma_ctr = float(sigma_ctr)
    sigma_cvr = float(sigma_cvr)
    correlation = float(correlation)
    if not (sigma_ctr >= 0 and sigma_cvr >= 0):
        raise ValueError("noise standard deviations must be >= 0")
    if not abs(correlation) < 1:
        raise ValueError("noise correlation must lie in (-1, 1)")
    if not campaign.has_truth:
        raise ValueError("campaign %s has no true probabilities"
                         % campaign.campaign_id)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((len(campaign), 2))
    eps_ctr = sigma_ctr*z[:, 0]
    eps_cvr = sigma_cvr*(correlation*z[:, 0]
                         + np.sqrt(1. - correlation**2)*z[:, 1])

    def perturb(p, sigma, eps):
        if sigma == 0:
            return p.copy()
        return np.clip(expit(logit(p) + eps), _p_lo, _p_hi)

    return campaign.with_predictions(
        perturb(campaign.ctr_true, sigma_ctr, eps_ctr),
        perturb(campaign.cvr_true, sigma_cvr, eps_cvr),
        var_logit_ctr=sigma_ctr**2,
        var_logit_cvr=sigma_cvr**2,
        cov_logit=correlation*sigma_ctr*sigma_cvr,
    )


# =============================================================================
# REPLAY
# =============================================================================


def _replay_kernel(wp, bids, budget):
    n = len(wp)
    won = np.zeros(n, dtype=np.bool_)
    spend = 0.
    for t in range(n):
        if bids[t] >= wp[t] and spend + wp[t] <= budget:
            won[t] = True
            spend += wp[t]
    return won, spend


if const.USE_NUMBA:
    _replay_kernel = numba.njit(nogil=True, cache=True)(_replay_kernel)


class SimulationOutcome(object):
    """Result of replaying one bid vector on one campaign."""

    def __init__(self, won, spend, expected_clicks, conversions, r_star,
                 cpc_camp, constraints, realized=False):
        self.won = won
        self.wins = int(np.sum(won))
        self.spend = float(spend)
        self.expected_clicks = float(expected_clicks)
        self.R = float(conversions)
        self.R_star = float(r_star)
        self.cpc_camp = float(cpc_camp)
        self.constraints = constraints
        self.realized = realized

    @property
    def cpc(self):
        if self.expected_clicks > 0:
            return self.spend/self.expected_clicks
        return 0.

    @property
    def ratio_R(self):
        if self.R_star > 0:
            return self.R/self.R_star
        return np.nan

    @property
    def ratio_cpc(self):
        return self.cpc/self.cpc_camp

    @property
    def budget_violated(self):
        return self.spend > self.constraints.budget

    @property
    def cpc_violated(self):
        # zero clicks at zero spend satisfies the constraint
        return self.spend > self.constraints.target_cpc*self.expected_clicks \
            * (1. + const.sqrt_epsf)

    def __repr__(self):
        return ('SimulationOutcome(wins=%d, spend=%.6g, R=%.6g, R*=%.6g, '
                'cpc=%.6g)' % (self.wins, self.spend, self.R, self.R_star,
                               self.cpc))


def oracle_optimum(campaign, constraints=None, tol=1e-6):
    """
    R*: optimal value of the fractional LP on true probabilities.

    The result is cached on the campaign per constraint pair.
    """
    if constraints is None:
        constraints = campaign.constraints
    if not campaign.has_truth:
        return np.nan
    key = (constraints.budget, constraints.target_cpc)
    if key not in campaign._r_star:
        inputs = BidInputs(campaign.wp, campaign.ctr_true*campaign.cvr_true,
                           campaign.ctr_true)
        campaign._r_star[key] = solve_dual(inputs, constraints,
                                           tol=tol).primal_value
    return campaign._r_star[key]


def replay(campaign, bids, constraints=None, realized=False, r_star=None):
    """
    Second-price replay with a hard budget.

    Auction t is won iff bid_t >= wp_t and the spend so far plus wp_t
    stays within the budget; over-budget wins are skipped, not truncated.
    Conversions are expected (sum of CTR CVR over wins) or, with
    ``realized``, counted from the logged outcomes.
    """
    if constraints is None:
        constraints = campaign.constraints
    bids = np.asarray(bids, dtype=float).reshape(-1)
    if len(bids) != len(campaign):
        raise ValueError("got %d bids for %d auctions"
                         % (len(bids), len(campaign)))
    won, spend = _replay_kernel(campaign.wp, bids, constraints.budget)

    if realized:
        if not campaign.has_outcomes:
            raise ValueError("campaign %s has no logged outcomes"
                             % campaign.campaign_id)
        clicks, conversions = campaign.click, campaign.conversion
    elif campaign.has_truth:
        clicks = campaign.ctr_true
        conversions = campaign.ctr_true*campaign.cvr_true
    else:
        logger.warning("campaign %s: no true probabilities, outcome uses "
                       "predictions", campaign.campaign_id)
        clicks = campaign.ctr_hat
        conversions = campaign.ctr_hat*campaign.cvr_hat

    if r_star is None:
        r_star = oracle_optimum(campaign, constraints)
    return SimulationOutcome(
        won, spend,
        expected_clicks=np.sum(clicks[won]),
        conversions=np.sum(conversions[won]),
        r_star=r_star,
        cpc_camp=np.sum(campaign.wp)/np.sum(clicks),
        constraints=constraints,
        realized=realized,
    )


UpliftMetrics = namedtuple('UpliftMetrics',
                           ['conv_uplift', 'cpc_shift', 'defined'])


def criteo_style_metrics(outcome, baseline, constraints=None):
    """
    Conversion uplift and CPC shift of ``outcome`` against a baseline.

    conv_uplift = (R - R_base)/R_base and cpc_shift = (CPC - CPC_base)/C.
    The uplift is undefined (NaN) when the baseline has no conversions.
    """
    if constraints is None:
        constraints = outcome.constraints
    defined = baseline.R > 0
    uplift = (outcome.R - baseline.R)/baseline.R if defined else np.nan
    shift = (outcome.cpc - baseline.cpc)/constraints.target_cpc
    return UpliftMetrics(uplift, shift, defined)
