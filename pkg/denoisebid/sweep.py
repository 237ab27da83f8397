# -*- coding: utf-8 -*-
"""
Experiment driver: campaign generation, noise sweeps and log ingestion.

For every (campaign, noise point) the driver injects prediction noise,
fits the priors the requested strategies need on a subsample of the
noisy predictions, bids with every strategy and replays the bids.
Campaigns are farmed out to a process pool; every random draw is seeded
from (seed, campaign index, noise index, stream) so results do not
depend on scheduling.
"""
from collections import namedtuple, OrderedDict
from io import IOBase
import logging
import multiprocessing
import os
import timeit

import numpy as np

from denoisebid.auctionlog import AuctionLogError, list_auction_logs, \
    read_auction_log, write_auction_log
from denoisebid.bidding import STRATEGY_PRIORS, run_strategy
from denoisebid.config import ConfigError
from denoisebid.coremath import gh_grid
from denoisebid.priors import save_prior, xdgmm_fit_1d, xdgmm_fit_2d
from denoisebid.simulation import campaign_from_prices, \
    criteo_style_metrics, derive_constraints, generate_synthetic_campaign, \
    inject_noise, oracle_optimum, replay

logger = logging.getLogger(__name__)

# independent random streams per (campaign, noise point)
STREAM_GENERATE = 0
STREAM_NOISE = 1
STREAM_SUBSAMPLE = 2
STREAM_FIT = 3
STREAM_SHARED = 4

MEAN_ID = '__mean__'

RESULT_COLUMNS = (
    'campaign_id', 'strategy', 'sigma_ctr', 'sigma_cvr',
    'R', 'R_star', 'ratio_R', 'spend', 'expected_clicks',
    'cpc', 'cpc_camp', 'ratio_cpc', 'dual_p', 'dual_q', 'duality_gap',
    'conv_uplift', 'cpc_shift', 'flags',
)
_numeric_columns = RESULT_COLUMNS[2:-1]

ResultRow = namedtuple('ResultRow', RESULT_COLUMNS)


def stream_seed(seed, campaign_index, noise_index, stream):
    return np.random.SeedSequence(
        [int(seed), int(campaign_index), int(noise_index), int(stream)]
    )


# =============================================================================
# RESULT I/O
# =============================================================================


class ResultWriter(object):
    """Class for dumping result rows as CSV."""

    def __init__(self, filename):
        self._delim = ','
        if isinstance(filename, IOBase):
            self.fid = filename
        else:
            self.fid = open(filename, 'w')
        print(self._delim.join(RESULT_COLUMNS), file=self.fid)

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()

    def close(self):
        if not self.fid.closed:
            self.fid.close()

    @staticmethod
    def _format(x):
        if x is None or not np.isfinite(x):
            return ''
        return '%.10g' % x

    def dump_row(self, row):
        output_str = self._delim.join(
            [row.campaign_id, row.strategy]
            + [self._format(getattr(row, c)) for c in _numeric_columns]
            + [row.flags]
        )
        print(output_str, file=self.fid)
        return output_str


def write_results(rows, filename):
    with ResultWriter(filename) as rw:
        for row in rows:
            rw.dump_row(row)
    logger.info("wrote %d result rows to %s", len(rows), filename)


def read_results(filename):
    """Read a results CSV back into ResultRow tuples (empty -> NaN)."""
    with open(filename, 'r') as f:
        header = f.readline().strip().split(',')
        if tuple(header) != RESULT_COLUMNS:
            raise ValueError("'%s' is not a results file" % filename)
        rows = []
        for line in f:
            fields = line.rstrip('\n').split(',')
            nums = [float(s) if s else np.nan for s in fields[2:-1]]
            rows.append(ResultRow(fields[0], fields[1], *nums,
                                  flags=fields[-1]))
    return rows


# =============================================================================
# CAMPAIGNS
# =============================================================================


def _read_prices(fname):
    try:
        return np.loadtxt(fname, delimiter=',', ndmin=1, comments='#')
    except ValueError:
        pass
    try:
        # single header line
        return np.loadtxt(fname, delimiter=',', ndmin=1, comments='#',
                          skiprows=1)
    except ValueError as e:
        raise AuctionLogError(fname, "not a winning-price list (%s)" % e)


def make_campaigns(cfg):
    """Campaigns for the configured dataset, with constraints derived."""
    source = cfg.dataset.source
    factors = cfg.constraints.factors()
    if source == 'csv':
        res = []
        for fname in list_auction_logs(cfg.dataset.path):
            campaign = read_auction_log(fname)
            res.append(campaign.with_constraints(
                derive_constraints(campaign, factors)
            ))
    else:
        params = cfg.dataset.synthetic_params()
        if source == 'synthetic':
            res = [
                generate_synthetic_campaign(
                    params,
                    seed=stream_seed(cfg.seed, i, 0, STREAM_GENERATE),
                    campaign_id='campaign_%05d' % i
                )
                for i in range(cfg.dataset.n_campaigns)
            ]
        else:
            res = []
            for i, fname in enumerate(list_auction_logs(cfg.dataset.path)):
                res.append(campaign_from_prices(
                    _read_prices(fname), params,
                    seed=stream_seed(cfg.seed, i, 0, STREAM_GENERATE),
                    campaign_id=os.path.splitext(os.path.basename(fname))[0]
                ))
    if not res:
        raise AuctionLogError(str(cfg.dataset.path), "no campaigns found")
    logger.info("loaded %d campaign(s) from %s source", len(res), source)
    return res


def noisy_campaign(campaign, sigma_ctr, sigma_cvr, correlation, seed,
                   campaign_index, noise_index):
    return inject_noise(
        campaign, sigma_ctr, sigma_cvr, correlation,
        seed=stream_seed(seed, campaign_index, noise_index, STREAM_NOISE)
    )


def subsample_indices(n, size, seed):
    size = min(int(size), n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=size, replace=False))


# =============================================================================
# PRIORS
# =============================================================================


def required_priors(strategies):
    return [k for k in ('ctr', 'ctr_normal', 'joint', 'joint_normal')
            if k in set(STRATEGY_PRIORS[s] for s in strategies)]


def fit_priors(pairs, keys, settings, seed):
    """
    Fit the priors named in ``keys`` on pooled subsampled predictions.

    Parameters
    ----------
    pairs : list of (Campaign, ndarray)
        Campaigns with the auction indices to fit on.
    keys : list of str
        Subset of 'ctr', 'ctr_normal', 'joint', 'joint_normal'.
    settings : dict
        ``fit`` maps every key to its unseeded FitConfig.
    seed : SeedSequence
    """
    if not keys:
        return {}
    logits = np.vstack([c.logits_hat[idx] for c, idx in pairs])
    covs = np.vstack([c.noise_covariances[idx] for c, idx in pairs])
    priors = {}
    for key, child in zip(keys, seed.spawn(len(keys))):
        config = settings['fit'][key].with_seed(child)
        if key.startswith('ctr'):
            priors[key] = xdgmm_fit_1d((logits[:, 0], covs[:, 0, 0]), config)
        else:
            priors[key] = xdgmm_fit_2d((logits, covs), config)
    return priors


def _prior_settings(cfg):
    prior = cfg.prior
    return dict(
        fit=dict(
            ctr=prior.fit_config(prior.k_ctr),
            ctr_normal=prior.fit_config(1),
            joint=prior.fit_config(prior.k_joint),
            joint_normal=prior.fit_config(1),
        ),
        subsample=prior.subsample,
    )


# =============================================================================
# EVALUATION
# =============================================================================


def evaluate_campaign(campaign, priors, strategies, sigma_ctr, sigma_cvr,
                      grid=None, cap_factor=10., tol=1e-6, realized=False,
                      uplift=False):
    """
    Bid with every strategy on one noisy campaign and replay the bids.

    Returns
    -------
    list of ResultRow
        In ``strategies`` order.  Uplift fields are filled against the
        non_robust row when ``uplift`` is set.
    """
    r_star = oracle_optimum(campaign, tol=tol)
    results = OrderedDict()
    for name in strategies:
        res = run_strategy(name, campaign, priors, grid=grid,
                           cap_factor=cap_factor, tol=tol)
        out = replay(campaign, res.bids, realized=realized, r_star=r_star)
        results[name] = (res, out)

    baseline = results['non_robust'][1] \
        if uplift and 'non_robust' in results else None
    rows = []
    for name, (res, out) in results.items():
        flags = list(res.flags)
        key = STRATEGY_PRIORS[name]
        if key is not None and priors[key].diagnostics is not None:
            flags.extend(priors[key].diagnostics.flags)
        if out.cpc_violated:
            flags.append('cpc_violated')
        if res.solution.gap > tol*max(1., res.solution.primal_value):
            flags.append('duality_gap')
        if not campaign.has_truth:
            flags.append('predicted_ctr_camp')
        if out.realized:
            flags.append('realized')
        if baseline is not None:
            metrics = criteo_style_metrics(out, baseline)
            conv_uplift, cpc_shift = metrics.conv_uplift, metrics.cpc_shift
            if not metrics.defined:
                flags.append('uplift_undefined')
        else:
            conv_uplift = cpc_shift = np.nan
        rows.append(ResultRow(
            campaign.campaign_id, name, sigma_ctr, sigma_cvr,
            out.R, out.R_star, out.ratio_R, out.spend, out.expected_clicks,
            out.cpc, out.cpc_camp, out.ratio_cpc,
            res.solution.p, res.solution.q, res.solution.gap,
            conv_uplift, cpc_shift, '|'.join(flags)
        ))
    return rows


def failed_rows(campaign_id, strategies, sigma_ctr, sigma_cvr, err):
    nan = [np.nan]*(len(_numeric_columns) - 2)
    return [ResultRow(campaign_id, name, sigma_ctr, sigma_cvr, *nan,
                      flags='failed:%s' % err.__class__.__name__)
            for name in strategies]


def _defined_means(table):
    defined = np.isfinite(table)
    count = defined.sum(axis=0)
    total = np.where(defined, table, 0.).sum(axis=0)
    means = np.full(table.shape[1], np.nan)
    np.divide(total, count, out=means, where=count > 0)
    return means


def aggregate_rows(rows, by_noise=True):
    """
    Mean over campaigns per (noise point, strategy).

    Failed rows are left out of the means, and so are undefined (NaN)
    entries of a column, e.g. the uplift against a baseline without
    conversions.  Without ``by_noise`` the rows are grouped by strategy
    alone and the sigma fields are left empty.
    """
    groups = OrderedDict()
    for row in rows:
        if by_noise:
            key = (row.sigma_ctr, row.sigma_cvr, row.strategy)
        else:
            key = (np.nan, np.nan, row.strategy)
        groups.setdefault(key, []).append(row)
    res = []
    for (sc, sv, name), group in groups.items():
        good = [r for r in group if not r.flags.startswith('failed')]
        n_failed = len(group) - len(good)
        if good:
            table = np.array([[getattr(r, c) for c in _numeric_columns[2:]]
                              for r in good])
            means = _defined_means(table)
        else:
            means = np.full(len(_numeric_columns) - 2, np.nan)
        flags = 'excluded_failed=%d' % n_failed if n_failed else ''
        res.append(ResultRow(MEAN_ID, name, sc, sv, *means, flags=flags))
    return res


# =============================================================================
# MULTIPROCESSING
# =============================================================================


def sweep_init(params):
    """
    Broadcast the sweep parameters as globals for multiprocessing

    Parameters
    ----------
    params : dict
        campaigns, points, strategies, seed, correlation, settings,
        shared_priors, quadrature_order, cap_factor, tol, inject, uplift
        and realized.
    """
    global paramMP
    paramMP = params


def sweep_cleanup():
    global paramMP
    del paramMP


def sweep_campaign(campaign_index):
    """
    Run every noise point of one campaign.

    Returns
    -------
    list of list of ResultRow
        One list per noise point.
    """
    campaign = paramMP['campaigns'][campaign_index]
    strategies = paramMP['strategies']
    settings = paramMP['settings']
    seed = paramMP['seed']
    grid = gh_grid(paramMP['quadrature_order'])
    keys = required_priors(strategies)

    res = []
    for noise_index, (sc, sv) in enumerate(paramMP['points']):
        try:
            if paramMP['inject']:
                noisy = noisy_campaign(
                    campaign, sc, sv, paramMP['correlation'], seed,
                    campaign_index, noise_index
                )
            else:
                noisy = campaign
            if paramMP['shared_priors'] is not None:
                priors = paramMP['shared_priors'][noise_index]
            else:
                idx = subsample_indices(
                    len(noisy), settings['subsample'],
                    stream_seed(seed, campaign_index, noise_index,
                                STREAM_SUBSAMPLE)
                )
                priors = fit_priors(
                    [(noisy, idx)], keys, settings,
                    stream_seed(seed, campaign_index, noise_index,
                                STREAM_FIT)
                )
            if paramMP['inject']:
                point = (sc, sv)
            else:
                point = (np.sqrt(np.mean(noisy.var_logit_ctr)),
                         np.sqrt(np.mean(noisy.var_logit_cvr)))
            rows = evaluate_campaign(
                noisy, priors, strategies, *point,
                grid=grid, cap_factor=paramMP['cap_factor'],
                tol=paramMP['tol'],
                realized=paramMP['realized'] and noisy.has_outcomes,
                uplift=paramMP['uplift']
            )
        except (ValueError, RuntimeError, ArithmeticError,
                np.linalg.LinAlgError) as err:
            logger.warning("campaign %s, noise point %d failed: %s",
                           campaign.campaign_id, noise_index, err)
            rows = failed_rows(campaign.campaign_id, strategies, sc, sv, err)
        res.append(rows)
    return res


def _shared_priors(campaigns, points, strategies, settings, seed,
                   correlation):
    keys = required_priors(strategies)
    res = []
    for noise_index, (sc, sv) in enumerate(points):
        pairs = []
        for ci, campaign in enumerate(campaigns):
            noisy = noisy_campaign(campaign, sc, sv, correlation, seed,
                                   ci, noise_index)
            idx = subsample_indices(
                len(noisy), settings['subsample'],
                stream_seed(seed, ci, noise_index, STREAM_SUBSAMPLE)
            )
            pairs.append((noisy, idx))
        res.append(fit_priors(
            pairs, keys, settings,
            np.random.SeedSequence([seed, noise_index, STREAM_SHARED])
        ))
    return res


def _run(params, ncpus):
    n = len(params['campaigns'])
    if n == 1 or ncpus == 1:
        logger.info("\tstarting serial sweep")
        start = timeit.default_timer()
        sweep_init(params)
        results = list(map(sweep_campaign, range(n)))
        sweep_cleanup()
        elapsed = timeit.default_timer() - start
    else:
        nproc = min(ncpus, n)
        chunksize = max(1, n//nproc)
        logger.info("\tstarting sweep on %d processes with chunksize %d",
                    nproc, chunksize)
        start = timeit.default_timer()
        pool = multiprocessing.Pool(nproc, sweep_init, (params, ))
        results = pool.map(sweep_campaign, range(n), chunksize=chunksize)
        pool.close()
        pool.join()
        elapsed = timeit.default_timer() - start
    logger.info("sweep took %f seconds", elapsed)

    # noise point major, then campaign, then strategy
    rows = []
    for noise_index in range(len(params['points'])):
        for campaign_rows in results:
            rows.extend(campaign_rows[noise_index])
    return rows


# =============================================================================
# COMMANDS
# =============================================================================


def _params(cfg, campaigns, points, strategies, inject, uplift):
    settings = _prior_settings(cfg)
    if cfg.dataset.source == 'synthetic' \
            and settings['subsample'] > cfg.dataset.n_auctions:
        raise ConfigError(
            '"prior:subsample" (%d) exceeds "dataset:n_auctions" (%d)'
            % (settings['subsample'], cfg.dataset.n_auctions)
        )
    return dict(
        campaigns=campaigns,
        points=points,
        strategies=strategies,
        seed=cfg.seed,
        correlation=cfg.noise.correlation if inject else 0.,
        settings=settings,
        shared_priors=None,
        quadrature_order=cfg.evaluation.quadrature_order,
        cap_factor=cfg.evaluation.bid_cap_factor,
        tol=cfg.evaluation.solver_tolerance,
        inject=inject,
        uplift=uplift,
        realized=cfg.dataset.realized_outcomes,
    )


def run_sweep(cfg, campaigns=None, output=None):
    """
    Noise sweep over the configured campaigns.

    Returns the per-campaign rows followed by the "__mean__" rows; they
    are also written to ``output`` (default ``cfg.output``) unless
    ``output`` is False.
    """
    if cfg.mode == 'empirical':
        return run_ingest(cfg, campaigns=campaigns, output=output)
    if campaigns is None:
        campaigns = make_campaigns(cfg)
    points = cfg.noise.points(cfg.mode)
    strategies = cfg.evaluation.strategies
    logger.info("sweeping %d campaign(s) over %d noise point(s) with %s",
                len(campaigns), len(points), ', '.join(strategies))
    params = _params(cfg, campaigns, points, strategies,
                     inject=True, uplift=False)
    if cfg.prior.shared:
        logger.info("\tfitting shared priors")
        params['shared_priors'] = _shared_priors(
            campaigns, points, strategies, params['settings'], cfg.seed,
            params['correlation']
        )
    rows = _run(params, cfg.multiprocessing)
    rows = rows + aggregate_rows(rows)
    if output is not False:
        write_results(rows, cfg.output if output is None else output)
    return rows


def run_ingest(cfg, campaigns=None, output=None):
    """
    Evaluate strategies on logged predictions with their own variances.

    Every campaign gets its own prior fitted on the logged logits and
    variances; uplift metrics are reported against non_robust.
    """
    if campaigns is None:
        if cfg.dataset.source != 'csv':
            raise ConfigError('ingest needs "dataset:source: csv"')
        factors = cfg.constraints.factors()
        campaigns = []
        for fname in list_auction_logs(cfg.dataset.path):
            campaign = read_auction_log(fname, require_variances=True)
            campaigns.append(campaign.with_constraints(
                derive_constraints(campaign, factors)
            ))
        if not campaigns:
            raise AuctionLogError(cfg.dataset.path, "no auction logs found")
    strategies = cfg.evaluation.strategies
    if 'non_robust' not in strategies:
        logger.info("adding non_robust as the uplift baseline")
        strategies = ['non_robust'] + strategies
    logger.info("evaluating %d logged campaign(s) with %s",
                len(campaigns), ', '.join(strategies))
    params = _params(cfg, campaigns, [(np.nan, np.nan)], strategies,
                     inject=False, uplift=True)
    rows = _run(params, cfg.multiprocessing)
    rows = rows + aggregate_rows(rows, by_noise=False)
    if output is not False:
        write_results(rows, cfg.output if output is None else output)
    return rows


def generate_campaigns(cfg, output_dir=None, inject=False):
    """
    Write the configured campaigns as auction logs, one file each.

    With ``inject`` the first noise point of the configured mode is
    applied exactly as the sweep applies it to noise index 0.
    """
    if output_dir is None:
        output_dir = os.path.join(cfg.working_dir, cfg.analysis_name)
    if not os.path.isdir(output_dir):
        os.makedirs(output_dir)
    campaigns = make_campaigns(cfg)
    if inject:
        sc, sv = cfg.noise.points(
            'ctr_only' if cfg.mode == 'empirical' else cfg.mode
        )[0]
        campaigns = [
            noisy_campaign(c, sc, sv, cfg.noise.correlation, cfg.seed, i, 0)
            for i, c in enumerate(campaigns)
        ]
    fnames = []
    for campaign in campaigns:
        fname = os.path.join(output_dir, '%s.csv' % campaign.campaign_id)
        write_auction_log(campaign, fname)
        fnames.append(fname)
    logger.info("wrote %d campaign(s) to %s", len(fnames), output_dir)
    return fnames


def fit_prior_files(cfg, fname, output, kind='ctr'):
    """Fit a prior on one auction log and save it to ``output``."""
    if kind not in ('ctr', 'joint'):
        raise ValueError("kind must be 'ctr' or 'joint', got %r" % kind)
    campaign = read_auction_log(fname, require_variances=True)
    settings = _prior_settings(cfg)
    idx = subsample_indices(
        len(campaign), settings['subsample'],
        stream_seed(cfg.seed, 0, 0, STREAM_SUBSAMPLE)
    )
    prior = fit_priors(
        [(campaign, idx)], [kind], settings,
        stream_seed(cfg.seed, 0, 0, STREAM_FIT)
    )[kind]
    save_prior(prior, output)
    logger.info("fitted %s from %d auctions of %s -> %s",
                prior, len(idx), fname, output)
    return prior
