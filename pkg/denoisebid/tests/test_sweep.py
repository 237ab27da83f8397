import logging
import os
import shutil
import sys
import tempfile
import unittest
from unittest import mock

import numpy as np
from numpy.testing import assert_allclose

from denoisebid.auctionlog import read_auction_log
from denoisebid.cli import main as cli_main
from denoisebid.config import ConfigError
from denoisebid.config.root import RootConfig
from denoisebid.priors import FitError
from denoisebid.simulation import generate_synthetic_campaign, replay, \
    SyntheticParams
from denoisebid.sweep import (
    MEAN_ID, RESULT_COLUMNS, ResultRow, aggregate_rows, failed_rows,
    fit_prior_files, generate_campaigns, make_campaigns, read_results,
    required_priors, run_ingest, run_sweep, stream_seed, subsample_indices,
    write_results, _shared_priors, _prior_settings
)


def sweep_config(tmpdir, **kwargs):
    cfg = {
        'analysis_name': 'unit',
        'working_dir': tmpdir,
        'seed': 7,
        'mode': 'ctr_only',
        'multiprocessing': 1,
        'dataset': {'n_campaigns': 2, 'n_auctions': 300},
        'noise': {'sigma_ctr': [0., 1.], 'sigma_cvr': [0.]},
        'prior': {'k_ctr': 2, 'k_joint': 2, 'subsample': 150,
                  'max_iterations': 60, 'restarts': 1},
        'evaluation': {'strategies': ['non_robust', 'denoise_ctr_only']},
    }
    for key, val in kwargs.items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    return RootConfig(cfg)


def campaign_rows(rows):
    return [r for r in rows if r.campaign_id != MEAN_ID]


class SweepTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        logging.disable(logging.CRITICAL)

    @classmethod
    def tearDownClass(cls):
        logging.disable(logging.NOTSET)

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)


class TestSeeding(unittest.TestCase):

    def test_streams_independent(self):
        a = np.random.default_rng(stream_seed(1, 0, 0, 1)).random(4)
        b = np.random.default_rng(stream_seed(1, 0, 0, 2)).random(4)
        c = np.random.default_rng(stream_seed(1, 0, 0, 1)).random(4)
        self.assertFalse(np.allclose(a, b))
        assert_allclose(a, c, rtol=0)

    def test_subsample(self):
        idx = subsample_indices(100, 30, stream_seed(0, 0, 0, 2))
        self.assertEqual(len(np.unique(idx)), 30)
        self.assertTrue(np.all(np.diff(idx) > 0))
        self.assertEqual(len(subsample_indices(10, 30, 0)), 10)

    def test_required_priors(self):
        self.assertEqual(required_priors(['non_robust', 'oracle']), [])
        self.assertEqual(
            required_priors(['denoise_joint', 'denoise_ctr_only',
                             'denoise_joint']),
            ['ctr', 'joint']
            )


class TestAggregation(unittest.TestCase):

    def row(self, cid, name, sigma, R, flags=''):
        nums = [float(R)]*(len(RESULT_COLUMNS) - 5)
        return ResultRow(cid, name, sigma, 0., *nums, flags=flags)

    def test_means(self):
        rows = [self.row('a', 'x', 1., 1.), self.row('b', 'x', 1., 3.),
                self.row('a', 'x', 2., 5.)]
        means = aggregate_rows(rows)
        self.assertEqual(len(means), 2)
        self.assertEqual(means[0].campaign_id, MEAN_ID)
        self.assertEqual(means[0].R, 2.)
        self.assertEqual(means[1].R, 5.)
        pooled = aggregate_rows(rows, by_noise=False)
        self.assertEqual(len(pooled), 1)
        assert_allclose(pooled[0].R, 3.)
        self.assertTrue(np.isnan(pooled[0].sigma_ctr))

    def test_failed_rows_excluded(self):
        failed = failed_rows('b', ['x'], 1., 0., FitError('no'))
        self.assertEqual(failed[0].flags, 'failed:FitError')
        self.assertTrue(np.isnan(failed[0].R))
        means = aggregate_rows([self.row('a', 'x', 1., 4.)] + failed)
        self.assertEqual(means[0].R, 4.)
        self.assertEqual(means[0].flags, 'excluded_failed=1')

    def test_zero_win_campaign_keeps_means_defined(self):
        c = generate_synthetic_campaign(
            SyntheticParams(n_auctions=200), seed=3
        )
        out = replay(c, np.zeros(len(c)))
        self.assertEqual(out.wins, 0)
        rows = [
            self.row('a', 'x', 1., 1.)._replace(cpc=2., ratio_cpc=0.5),
            self.row('b', 'x', 1., 3.)._replace(
                cpc=out.cpc, ratio_cpc=out.ratio_cpc, conv_uplift=np.nan
            ),
        ]
        means = aggregate_rows(rows)
        assert_allclose(means[0].cpc, 1.)
        assert_allclose(means[0].ratio_cpc, 0.25)
        # undefined uplift is left out rather than blanking the group
        assert_allclose(means[0].conv_uplift, 1.)
        assert_allclose(means[0].R, 2.)

    def test_undefined_column(self):
        rows = [self.row('a', 'x', 1., 1.)._replace(ratio_R=np.nan)]
        self.assertTrue(np.isnan(aggregate_rows(rows)[0].ratio_R))

    def test_all_failed(self):
        means = aggregate_rows(failed_rows('b', ['x'], 1., 0.,
                                           ValueError('no')))
        self.assertTrue(np.isnan(means[0].R))

    def test_write_read(self):
        tmpdir = tempfile.mkdtemp()
        try:
            fname = os.path.join(tmpdir, 'r.csv')
            rows = [self.row('a', 'x', 1., 0.5, flags='bid_cap')] \
                + failed_rows('b', ['x'], 1., 0., ValueError('no'))
            write_results(rows, fname)
            again = read_results(fname)
            self.assertEqual(len(again), 2)
            self.assertEqual(again[0].flags, 'bid_cap')
            self.assertEqual(again[0].R, 0.5)
            self.assertTrue(np.isnan(again[1].R))
            with open(fname) as f:
                self.assertEqual(f.readline().strip(),
                                 ','.join(RESULT_COLUMNS))
        finally:
            shutil.rmtree(tmpdir)


class TestSweep(SweepTestCase):

    def test_row_layout(self):
        cfg = sweep_config(self.tmpdir)
        rows = run_sweep(cfg)
        # 2 campaigns x 2 noise points x 2 strategies, then the means
        self.assertEqual(len(rows), 12)
        per = campaign_rows(rows)
        self.assertEqual([r.sigma_ctr for r in per], [0.]*4 + [1.]*4)
        self.assertEqual([r.strategy for r in per[:2]],
                         ['non_robust', 'denoise_ctr_only'])
        self.assertEqual(per[0].campaign_id, 'campaign_00000')
        self.assertEqual(per[2].campaign_id, 'campaign_00001')
        self.assertTrue(os.path.exists(cfg.output))
        self.assertEqual(len(read_results(cfg.output)), 12)

    def test_means_match_rows(self):
        rows = run_sweep(sweep_config(self.tmpdir), output=False)
        per = campaign_rows(rows)
        means = [r for r in rows if r.campaign_id == MEAN_ID]
        for m in means:
            group = [r for r in per if r.strategy == m.strategy
                     and r.sigma_ctr == m.sigma_ctr]
            self.assertEqual(len(group), 2)
            assert_allclose(m.ratio_R, np.mean([r.ratio_R for r in group]))

    def test_zero_noise_collapse(self):
        rows = run_sweep(sweep_config(self.tmpdir), output=False)
        for cid in ('campaign_00000', 'campaign_00001'):
            pair = [r for r in rows
                    if r.campaign_id == cid and r.sigma_ctr == 0.]
            assert_allclose(pair[1].dual_p, pair[0].dual_p, rtol=1e-6,
                            atol=1e-12)
            assert_allclose(pair[1].dual_q, pair[0].dual_q, rtol=1e-6,
                            atol=1e-12)
            assert_allclose(pair[1].ratio_R, pair[0].ratio_R, atol=1e-6)

    def test_oracle_dominance(self):
        cfg = sweep_config(self.tmpdir, evaluation={
            'strategies': ['non_robust', 'denoise_ctr_only', 'oracle']
        })
        for r in campaign_rows(run_sweep(cfg, output=False)):
            if 'cpc_violated' not in r.flags:
                self.assertLessEqual(r.ratio_R, 1. + 1e-6)

    def test_byte_determinism(self):
        first = os.path.join(self.tmpdir, 'first.csv')
        second = os.path.join(self.tmpdir, 'second.csv')
        run_sweep(sweep_config(self.tmpdir), output=first)
        run_sweep(sweep_config(self.tmpdir, multiprocessing=2),
                  output=second)
        with open(first, 'rb') as f1, open(second, 'rb') as f2:
            self.assertEqual(f1.read(), f2.read())

    def test_joint_mode(self):
        cfg = sweep_config(
            self.tmpdir, mode='joint',
            dataset={'n_campaigns': 1},
            noise={'sigma_ctr': [0.5], 'sigma_cvr': [0., 0.5]},
            evaluation={'strategies': ['non_robust', 'denoise_joint',
                                       'denoise_joint_normal']}
        )
        rows = run_sweep(cfg, output=False)
        per = campaign_rows(rows)
        self.assertEqual(len(per), 6)
        self.assertEqual(sorted(set(r.sigma_cvr for r in per)), [0., 0.5])
        for r in per:
            self.assertFalse(r.flags.startswith('failed'), r.flags)
            self.assertTrue(np.isfinite(r.ratio_R))

    def test_shared_prior(self):
        cfg = sweep_config(self.tmpdir, prior={'shared': True})
        campaigns = make_campaigns(cfg)
        priors = _shared_priors(
            campaigns, cfg.noise.points(cfg.mode),
            cfg.evaluation.strategies, _prior_settings(cfg), cfg.seed, 0.
        )
        self.assertEqual(len(priors), 2)
        self.assertEqual(list(priors[0].keys()), ['ctr'])
        rows = run_sweep(cfg, output=False)
        self.assertEqual(len(campaign_rows(rows)), 8)

    def test_fit_settings_come_from_config(self):
        cfg = sweep_config(self.tmpdir, prior={'tolerance': 1e-5})
        fit = _prior_settings(cfg)['fit']
        self.assertEqual(fit['ctr'].n_components, 2)
        self.assertEqual(fit['joint_normal'].n_components, 1)
        for config in fit.values():
            self.assertEqual(config.max_iterations, 60)
            self.assertEqual(config.restarts, 1)
            self.assertEqual(config.loglik_tolerance, 1e-5)
            self.assertIsNone(config.rng_seed)
        with mock.patch.object(type(cfg.prior), 'fit_config',
                               wraps=cfg.prior.fit_config) as fit_config:
            run_sweep(cfg, output=False)
        self.assertTrue(fit_config.called)

    def test_subsample_too_large(self):
        cfg = sweep_config(self.tmpdir, prior={'subsample': 1000})
        self.assertRaises(ConfigError, run_sweep, cfg, output=False)

    def test_failed_campaign(self):
        cfg = sweep_config(self.tmpdir)
        with mock.patch('denoisebid.sweep.fit_priors',
                        side_effect=FitError('degenerate')):
            rows = run_sweep(cfg, output=False)
        per = campaign_rows(rows)
        self.assertEqual(len(per), 8)
        self.assertTrue(all(r.flags == 'failed:FitError' for r in per))
        means = [r for r in rows if r.campaign_id == MEAN_ID]
        self.assertTrue(all(r.flags == 'excluded_failed=2' for r in means))


class TestIngest(SweepTestCase):

    def test_zero_variance_uplift(self):
        gen = sweep_config(self.tmpdir, dataset={'n_auctions': 1000})
        logs = os.path.join(self.tmpdir, 'logs')
        fnames = generate_campaigns(gen, output_dir=logs)
        self.assertEqual(len(fnames), 2)
        cfg = sweep_config(
            self.tmpdir, mode='empirical',
            dataset={'source': 'csv', 'path': logs},
            evaluation={'strategies': ['denoise_joint']}
        )
        rows = run_ingest(cfg, output=False)
        per = campaign_rows(rows)
        self.assertEqual([r.strategy for r in per[:2]],
                         ['non_robust', 'denoise_joint'])
        for r in per:
            self.assertEqual(r.sigma_ctr, 0.)
            self.assertLess(abs(r.conv_uplift), 1e-9)
        means = [r for r in rows if r.campaign_id == MEAN_ID]
        self.assertEqual(len(means), 2)
        self.assertTrue(np.isnan(means[0].sigma_ctr))

    def test_path_equivalence(self):
        gen = sweep_config(self.tmpdir, noise={'sigma_ctr': [0.5]})
        logs = os.path.join(self.tmpdir, 'noisy')
        generate_campaigns(gen, output_dir=logs, inject=True)
        c = read_auction_log(os.path.join(logs, 'campaign_00000.csv'))
        assert_allclose(c.var_logit_ctr, 0.25)

        swept = campaign_rows(run_sweep(gen, output=False))
        cfg = sweep_config(
            self.tmpdir, mode='empirical',
            dataset={'source': 'csv', 'path': logs},
        )
        ingested = campaign_rows(run_ingest(cfg, output=False))
        self.assertEqual(len(swept), len(ingested))
        for a, b in zip(swept, ingested):
            self.assertEqual((a.campaign_id, a.strategy),
                             (b.campaign_id, b.strategy))
            assert_allclose(b.sigma_ctr, 0.5)
            for name in ('R', 'R_star', 'spend', 'dual_p', 'dual_q'):
                assert_allclose(getattr(b, name), getattr(a, name),
                                rtol=1e-12, atol=0)

    def test_empirical_mode_dispatch(self):
        logs = os.path.join(self.tmpdir, 'logs')
        generate_campaigns(sweep_config(self.tmpdir), output_dir=logs)
        cfg = sweep_config(self.tmpdir, mode='empirical',
                           dataset={'source': 'csv', 'path': logs})
        rows = run_sweep(cfg, output=False)
        self.assertTrue(all(np.isfinite(r.conv_uplift)
                            for r in campaign_rows(rows)))

    def test_requires_csv(self):
        cfg = sweep_config(self.tmpdir, mode='empirical')
        self.assertRaises(ConfigError, run_ingest, cfg, output=False)

    def test_fit_prior_files(self):
        gen = sweep_config(self.tmpdir, noise={'sigma_ctr': [0.5]},
                           dataset={'n_campaigns': 1})
        fname = generate_campaigns(gen, output_dir=self.tmpdir,
                                   inject=True)[0]
        out = os.path.join(self.tmpdir, 'prior.txt')
        prior = fit_prior_files(gen, fname, out)
        self.assertTrue(os.path.exists(out))
        self.assertEqual(len(prior.weights), 2)
        self.assertRaises(ValueError, fit_prior_files, gen, fname, out,
                          kind='cvr')


class TestCommandLine(SweepTestCase):

    def write_config(self, text):
        fname = os.path.join(self.tmpdir, 'cfg.yml')
        with open(fname, 'w') as f:
            f.write(text)
        return fname

    def run_main(self, *argv):
        with mock.patch.object(sys, 'argv', ['denoisebid'] + list(argv)):
            with self.assertRaises(SystemExit) as cm:
                cli_main.main()
        return cm.exception.code

    def test_exit_status(self):
        from denoisebid.auctionlog import AuctionLogError
        from denoisebid.bidding import SolverError

        self.assertEqual(cli_main.exit_status(ConfigError('x')), 1)
        self.assertEqual(cli_main.exit_status(AuctionLogError('f', 'x')), 2)
        self.assertEqual(cli_main.exit_status(IOError('x')), 2)
        self.assertEqual(cli_main.exit_status(SolverError('x')), 3)
        self.assertEqual(cli_main.exit_status(FitError('x')), 3)
        self.assertIsNone(cli_main.exit_status(KeyError('x')))

    def test_config_error(self):
        fname = self.write_config(
            "working_dir: %s\nmultiprocessing: 1\n"
            "dataset:\n  n_campaigns: 1\n  n_auctions: 500\n"
            "evaluation:\n  quadrature_order: 2\n" % self.tmpdir
        )
        self.assertEqual(self.run_main('sweep', '-q', '-c', fname), 1)

    def test_data_error(self):
        bad = os.path.join(self.tmpdir, 'bad.csv')
        with open(bad, 'w') as f:
            f.write("wp,ctr_hat\n10,0.1\n")
        fname = self.write_config("working_dir: %s\n" % self.tmpdir)
        self.assertEqual(
            self.run_main('ingest', bad, '-q', '-c', fname), 2
        )

    def test_sweep_command(self):
        fname = self.write_config(
            "working_dir: %s\nmultiprocessing: 1\n"
            "dataset:\n  n_campaigns: 1\n  n_auctions: 200\n"
            "prior:\n  subsample: 100\n  restarts: 1\n" % self.tmpdir
        )
        out = os.path.join(self.tmpdir, 'cli.csv')
        with mock.patch.object(
                sys, 'argv',
                ['denoisebid', 'sweep', '-q', '-c', fname, '--out', out,
                 '--sigma-ctr-grid', '0,1', '--strategies', 'non_robust']):
            cli_main.main()
        rows = read_results(out)
        self.assertEqual(len(rows), 4)
