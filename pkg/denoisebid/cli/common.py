"""Shared options, config overrides and logging for the sub-commands"""
import logging
import os


def add_config_arguments(p, sweep=True):
    p.add_argument(
        '-c', '--config', type=str, default=None,
        help='YAML configuration file (first document is used)'
        )
    p.add_argument(
        '--seed', type=int, default=None,
        help='root random seed'
        )
    p.add_argument(
        '-o', '--out', type=str, default=None,
        help='output path'
        )
    p.add_argument(
        '--mode', choices=('ctr_only', 'joint', 'empirical'), default=None,
        help='noise model of the experiment'
        )
    p.add_argument(
        '--k-budget', type=float, default=None,
        help='budget as a fraction of total winning prices'
        )
    p.add_argument(
        '--k-cpc', type=float, default=None,
        help='target CPC as a fraction of the campaign CPC'
        )
    p.add_argument(
        '-j', '--jobs', type=int, default=None,
        help='number of worker processes'
        )
    p.add_argument(
        '--sigma-ctr-grid', type=str, default=None,
        help='comma-separated CTR noise standard deviations (logit units)'
        )
    p.add_argument(
        '--sigma-cvr-grid', type=str, default=None,
        help='comma-separated CVR noise standard deviations (logit units)'
        )
    if sweep:
        p.add_argument(
            '--strategies', type=str, default=None,
            help='comma-separated strategy names'
            )
        p.add_argument(
            '--quadrature-order', type=int, default=None,
            help='Gauss-Hermite order per dimension (3-10)'
            )
        p.add_argument(
            '--shared-prior', action='store_true',
            help='fit one prior per noise point on all campaigns'
            )
    p.add_argument(
        '-q', '--quiet', action='store_true',
        help="don't report progress in terminal"
        )


def _grid(text):
    return [float(s) for s in text.split(',') if s.strip()]


def load_config(args):
    """First config document with command-line overrides applied."""
    from denoisebid import config
    from denoisebid.config import ConfigError

    cfg = config.open(args.config)[0]
    overrides = [
        ('seed', 'seed', None),
        ('mode', 'mode', None),
        ('k_budget', 'constraints:k_budget', None),
        ('k_cpc', 'constraints:k_cpc', None),
        ('jobs', 'multiprocessing', None),
        ('sigma_ctr_grid', 'noise:sigma_ctr', _grid),
        ('sigma_cvr_grid', 'noise:sigma_cvr', _grid),
        ('strategies', 'evaluation:strategies', None),
        ('quadrature_order', 'evaluation:quadrature_order', None),
    ]
    for attr, key, conv in overrides:
        val = getattr(args, attr, None)
        if val is None:
            continue
        try:
            cfg.set(key, conv(val) if conv else val)
        except ValueError as e:
            raise ConfigError('--%s: %s' % (attr.replace('_', '-'), e))
    if getattr(args, 'shared_prior', False):
        cfg.set('prior:shared', True)
    return cfg


def start_logging(args, cfg=None, name=None):
    """
    Console handler on the package logger, plus a log file next to the
    output when ``cfg`` is given.  Returns the handlers for stop_logging.
    """
    log_level = logging.DEBUG if args.debug else logging.INFO
    if args.quiet:
        log_level = logging.ERROR
    logger = logging.getLogger('denoisebid')
    logger.setLevel(log_level)
    ch = logging.StreamHandler()
    ch.setLevel(logging.CRITICAL if args.quiet else log_level)
    cf = logging.Formatter('%(asctime)s - %(message)s', '%y-%m-%d %H:%M:%S')
    ch.setFormatter(cf)
    logger.addHandler(ch)
    handlers = [ch]

    if cfg is not None and name is not None:
        logfile = os.path.join(
            cfg.working_dir, '%s-%s.log' % (cfg.analysis_name, name)
            )
        fh = logging.FileHandler(logfile, mode='w')
        fh.setLevel(log_level)
        ff = logging.Formatter(
                '%(asctime)s - %(name)s - %(message)s',
                '%m-%d %H:%M:%S'
                )
        fh.setFormatter(ff)
        logger.info("logging to %s", logfile)
        logger.addHandler(fh)
        handlers.append(fh)
    return handlers


def stop_logging(handlers):
    logger = logging.getLogger('denoisebid')
    for h in handlers:
        h.flush()
        h.close()
        logger.removeHandler(h)
