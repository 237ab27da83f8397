# -*- coding: utf-8 -*-
"""
Optimal second-price bidding under a budget and a target-CPC constraint.

The offline problem over T auctions with values v_t, click probabilities
c_t and winning prices wp_t is the LP

    max  sum_t v_t x_t
    s.t. sum_t wp_t x_t <= B
         sum_t (wp_t - C c_t) x_t <= 0
         0 <= x_t <= 1

Eliminating the per-auction dual variables r_t = max(0, reduced cost)
leaves the convex piecewise-linear dual

    g(p, q) = B p + sum_t max(0, v_t - p wp_t - q (wp_t - C c_t)),

and the optimal bid is bid_t = (v_t + q C c_t) / (p + q).

Strategies differ only in what they plug in for v_t and c_t: noisy
predictions (non-robust), true probabilities (oracle), or denoised
posterior expectations (DenoiseBid).
"""
import logging

import numpy as np
from scipy.optimize import linprog

from denoisebid import constants as const
from denoisebid.coremath import logit, gh_grid
from denoisebid.posterior import denoise_ctr_1d_batch, denoise_joint_batch

logger = logging.getLogger(__name__)

STRATEGY_NAMES = (
    'non_robust',
    'denoise_ctr_only',
    'denoise_ctr_only_normal',
    'denoise_joint',
    'denoise_joint_normal',
    'oracle',
)

# strategy name -> prior it consumes
STRATEGY_PRIORS = {
    'non_robust': None,
    'oracle': None,
    'denoise_ctr_only': 'ctr',
    'denoise_ctr_only_normal': 'ctr_normal',
    'denoise_joint': 'joint',
    'denoise_joint_normal': 'joint_normal',
}


class SolverError(RuntimeError):
    """The LP solver did not return an optimal solution."""


# =============================================================================
# TYPES
# =============================================================================


class Constraints(object):
    """Campaign budget B and target cost-per-click C (currency units).

    B = 0 is accepted as the degenerate no-spend campaign.
    """

    __slots__ = ('budget', 'target_cpc')

    def __init__(self, budget, target_cpc):
        budget = float(budget)
        target_cpc = float(target_cpc)
        if not np.isfinite(budget) or budget < 0:
            raise ValueError("budget must be >= 0, got %s" % budget)
        if not np.isfinite(target_cpc) or target_cpc <= 0:
            raise ValueError("target CPC must be > 0, got %s" % target_cpc)
        self.budget = budget
        self.target_cpc = target_cpc

    def scaled(self, factor):
        """Constraints in a currency rescaled by ``factor``."""
        return Constraints(self.budget*factor, self.target_cpc*factor)

    def __eq__(self, other):
        if not isinstance(other, Constraints):
            return NotImplemented
        return (self.budget, self.target_cpc) \
            == (other.budget, other.target_cpc)

    def __repr__(self):
        return 'Constraints(budget=%r, target_cpc=%r)' % (
            self.budget, self.target_cpc)


class BidInputs(object):
    """Per-auction winning prices, values and click probabilities."""

    def __init__(self, winning_price, value, click):
        wp = np.array(winning_price, dtype=float).reshape(-1)
        v = np.array(value, dtype=float).reshape(-1)
        c = np.array(click, dtype=float).reshape(-1)
        if not (len(wp) == len(v) == len(c)):
            raise ValueError("input lengths differ: %d, %d, %d"
                             % (len(wp), len(v), len(c)))
        if len(wp) == 0:
            raise ValueError("need at least one auction")
        if np.any(~(wp > 0)) or np.any(~np.isfinite(wp)):
            raise ValueError("winning prices must be finite and > 0")
        if np.any(~((c >= 0) & (c <= 1))):
            raise ValueError("click probabilities must lie in [0, 1]")
        if np.any(~((v >= 0) & (v <= 1))):
            raise ValueError("values must lie in [0, 1]")
        if np.any(v > c + const.sqrt_epsf):
            # approximate posterior expectations may cross slightly
            logger.debug("%d value(s) exceed the click probability",
                         np.sum(v > c + const.sqrt_epsf))
        for arr in (wp, v, c):
            arr.flags.writeable = False
        self.wp = wp
        self.value = v
        self.click = c

    def __len__(self):
        return len(self.wp)

    def scaled(self, factor):
        """Inputs with winning prices rescaled by ``factor``."""
        return BidInputs(self.wp*factor, self.value, self.click)


class DualSolution(object):
    """Optimal dual variables with their optimality certificate."""

    def __init__(self, p, q, dual_value, primal_value, allocation,
                 budget_active, cpc_active, cs_residuals):
        self.p = p
        self.q = q
        self.dual_value = dual_value
        self.primal_value = primal_value
        self.gap = max(0., dual_value - primal_value)
        self.allocation = allocation
        self.budget_active = budget_active
        self.cpc_active = cpc_active
        self.cs_residuals = cs_residuals

    def __repr__(self):
        return ('DualSolution(p=%.6g, q=%.6g, primal=%.8g, gap=%.3g, '
                'budget_active=%s, cpc_active=%s)'
                % (self.p, self.q, self.primal_value, self.gap,
                   self.budget_active, self.cpc_active))


class StrategyResult(object):
    """Bids of one strategy on one campaign, with the inputs behind them."""

    def __init__(self, name, bids, solution, inputs, flags=()):
        self.name = name
        self.bids = bids
        self.solution = solution
        self.inputs = inputs
        self.flags = list(flags)

    def __repr__(self):
        return 'StrategyResult(%s, %s, flags=%s)' % (
            self.name, self.solution, self.flags)


# =============================================================================
# DUAL PROBLEM
# =============================================================================


def reduced_costs(p, q, inputs, constraints):
    """v_t - p wp_t - q (wp_t - C c_t)"""
    return inputs.value - p*inputs.wp \
        - q*(inputs.wp - constraints.target_cpc*inputs.click)


def dual_objective(p, q, inputs, constraints):
    """g(p, q) = B p + sum_t max(0, reduced cost_t); convex in (p, q)."""
    rc = reduced_costs(p, q, inputs, constraints)
    return constraints.budget*p + float(np.sum(np.maximum(rc, 0.)))


def _constraint_matrix(inputs, constraints):
    A = np.vstack([
        inputs.wp,
        inputs.wp - constraints.target_cpc*inputs.click,
    ])
    b = np.r_[constraints.budget, 0.]
    return A, b


def solve_dual(inputs, constraints, tol=1e-6):
    """
    Solve the two-constraint LP and return its optimal dual variables.

    The LP is solved with HiGHS; p and q are read off the constraint
    marginals and certified by the duality gap g(p, q) - primal value
    and the complementary-slackness residuals.

    Parameters
    ----------
    inputs : BidInputs
    constraints : Constraints
    tol : float, optional
        Relative tolerance for the certificate and for flagging binding
        constraints.

    Returns
    -------
    DualSolution
    """
    A, b = _constraint_matrix(inputs, constraints)
    res = linprog(
        -inputs.value, A_ub=A, b_ub=b, bounds=(0., 1.), method='highs'
    )
    if res.status != 0:
        raise SolverError("LP solver failed: %s" % res.message)
    x = np.clip(res.x, 0., 1.)
    marg = np.asarray(res.ineqlin.marginals)
    p = max(0., -float(marg[0]))
    q = max(0., -float(marg[1]))

    primal = float(np.dot(inputs.value, x))
    dual = dual_objective(p, q, inputs, constraints)
    spend = float(np.dot(inputs.wp, x))
    cpc_slack = float(constraints.target_cpc*np.dot(inputs.click, x) - spend)
    budget_slack = constraints.budget - spend
    scale = max(1., constraints.budget)
    sol = DualSolution(
        p, q, dual, primal, x,
        budget_active=budget_slack <= tol*scale,
        cpc_active=cpc_slack <= tol*scale,
        cs_residuals=(p*budget_slack, q*cpc_slack),
    )
    if sol.gap > tol*max(1., primal):
        logger.warning("duality gap %.3g exceeds tolerance (%s)",
                       sol.gap, sol)
    else:
        logger.debug("solved dual: %s", sol)
    return sol


def primal_from_duals(p, q, inputs, constraints, tol=1e-7):
    """
    Reconstruct a fractional allocation from dual variables.

    Auctions with positive reduced cost are won, negative ones lost.  Tie
    auctions (|reduced cost| <= tol * max value) are filled fractionally
    by solving the residual LP over the ties, which binds whichever
    constraint is tighter.

    Returns
    -------
    allocation : ndarray
        (T,) values in [0, 1].
    value : float
        sum_t v_t x_t.
    """
    rc = reduced_costs(p, q, inputs, constraints)
    thresh = tol*max(float(np.max(inputs.value)), const.epsf)
    pos = rc > thresh
    tie = np.abs(rc) <= thresh
    x = pos.astype(float)
    if np.any(tie):
        A, b = _constraint_matrix(inputs, constraints)
        rem = b - np.dot(A[:, pos], np.ones(np.sum(pos)))
        if np.all(rem >= -tol*max(1., constraints.budget)):
            res = linprog(
                -inputs.value[tie], A_ub=A[:, tie],
                b_ub=np.maximum(rem, 0.), bounds=(0., 1.), method='highs'
            )
            if res.status == 0:
                x[tie] = np.clip(res.x, 0., 1.)
            else:
                logger.debug("tie fill failed: %s", res.message)
        else:
            logger.debug("positive reduced-cost set is infeasible")
    return x, float(np.dot(inputs.value, x))


def bids_from_duals(p, q, inputs, constraints, cap=None):
    """
    bid_t = v_t/(p + q) + q C c_t/(p + q).

    When p + q = 0 both constraints are slack and every auction should be
    won; the bids are then set to ``cap`` (default 10 max_t wp_t).
    """
    denom = p + q
    if denom <= 0.:
        if cap is None:
            cap = const.default_bid_cap_factor*float(np.max(inputs.wp))
        logger.warning("p + q = 0; bidding the cap %.6g everywhere", cap)
        return np.full(len(inputs), float(cap))
    return (inputs.value + q*constraints.target_cpc*inputs.click)/denom


# =============================================================================
# STRATEGIES
# =============================================================================


def _bid(name, inputs, constraints, cap_factor, tol, flags=()):
    flags = list(flags)
    sol = solve_dual(inputs, constraints, tol=tol)
    cap = cap_factor*float(np.max(inputs.wp))
    if sol.p + sol.q <= 0.:
        flags.append('bid_cap')
    bids = bids_from_duals(sol.p, sol.q, inputs, constraints, cap=cap)
    return StrategyResult(name, bids, sol, inputs, flags)


def strategy_non_robust(campaign, constraints=None,
                        cap_factor=const.default_bid_cap_factor, tol=1e-6):
    """Plug the noisy predictions directly into the deterministic bid."""
    if constraints is None:
        constraints = campaign.constraints
    inputs = BidInputs(
        campaign.wp, campaign.ctr_hat*campaign.cvr_hat, campaign.ctr_hat
    )
    return _bid('non_robust', inputs, constraints, cap_factor, tol)


def strategy_oracle(campaign, constraints=None,
                    cap_factor=const.default_bid_cap_factor, tol=1e-6):
    """Bid on the true CTR and CVR."""
    if constraints is None:
        constraints = campaign.constraints
    inputs = BidInputs(
        campaign.wp, campaign.ctr_true*campaign.cvr_true, campaign.ctr_true
    )
    return _bid('oracle', inputs, constraints, cap_factor, tol)


def strategy_denoise_ctr_only(campaign, prior, constraints=None,
                              cap_factor=const.default_bid_cap_factor,
                              tol=1e-6, name='denoise_ctr_only'):
    """
    DenoiseBid with uncertainty in CTR only.

    c_t = E[CTR_t | prediction] under the univariate prior and
    v_t = CVR_t c_t, the predicted CVR being taken as exact.
    """
    if constraints is None:
        constraints = campaign.constraints
    ctr, fallback = denoise_ctr_1d_batch(
        logit(campaign.ctr_hat), campaign.var_logit_ctr, prior,
        return_flags=True
    )
    flags = ['evidence_fallback'] if np.any(fallback) else []
    # a noiseless prediction is its own posterior mean
    ctr = np.where(campaign.var_logit_ctr == 0, campaign.ctr_hat, ctr)
    inputs = BidInputs(campaign.wp, campaign.cvr_hat*ctr, ctr)
    return _bid(name, inputs, constraints, cap_factor, tol, flags)


def strategy_denoise_joint(campaign, prior, constraints=None, grid=None,
                           cap_factor=const.default_bid_cap_factor,
                           tol=1e-6, name='denoise_joint'):
    """
    DenoiseBid with joint CTR/CVR uncertainty.

    c_t = E[CTR_t | predictions] (probit) and v_t = E[CTR_t CVR_t |
    predictions] (Gauss-Hermite) under the bivariate prior.
    """
    if constraints is None:
        constraints = campaign.constraints
    if grid is None:
        grid = gh_grid(const.default_quadrature_order)
    ctr, value, fallback = denoise_joint_batch(
        campaign.logits_hat, campaign.noise_covariances, prior, grid,
        return_flags=True
    )
    flags = ['evidence_fallback'] if np.any(fallback) else []
    exact = (campaign.var_logit_ctr == 0) & (campaign.var_logit_cvr == 0)
    ctr = np.where(exact, campaign.ctr_hat, ctr)
    value = np.where(exact, campaign.ctr_hat*campaign.cvr_hat, value)
    inputs = BidInputs(campaign.wp, value, ctr)
    return _bid(name, inputs, constraints, cap_factor, tol, flags)


def run_strategy(name, campaign, priors=None, constraints=None, grid=None,
                 cap_factor=const.default_bid_cap_factor, tol=1e-6):
    """
    Dispatch a strategy by name.

    ``priors`` maps the keys of STRATEGY_PRIORS ('ctr', 'ctr_normal',
    'joint', 'joint_normal') to fitted priors.
    """
    if name not in STRATEGY_PRIORS:
        raise ValueError("unknown strategy '%s'; choose from %s"
                         % (name, ', '.join(STRATEGY_NAMES)))
    if name == 'non_robust':
        return strategy_non_robust(campaign, constraints, cap_factor, tol)
    elif name == 'oracle':
        return strategy_oracle(campaign, constraints, cap_factor, tol)
    prior = priors[STRATEGY_PRIORS[name]]
    if name.startswith('denoise_ctr_only'):
        return strategy_denoise_ctr_only(
            campaign, prior, constraints, cap_factor, tol, name=name
        )
    return strategy_denoise_joint(
        campaign, prior, constraints, grid, cap_factor, tol, name=name
    )
