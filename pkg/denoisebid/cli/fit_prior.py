descr = 'Fits a logit-space mixture prior to one auction log'
example = """
examples:
    denoisebid fit-prior campaign_00000.csv --out prior.txt
    denoisebid fit-prior campaign_00000.csv --kind joint --out prior2d.txt
"""


def configure_parser(sub_parsers):
    from argparse import RawDescriptionHelpFormatter

    p = sub_parsers.add_parser(
        'fit-prior', description=descr, help=descr, epilog=example,
        formatter_class=RawDescriptionHelpFormatter
        )
    p.add_argument(
        'csv', type=str,
        help='auction-log CSV with populated variance columns'
        )
    p.add_argument(
        '-c', '--config', type=str, default=None,
        help='YAML configuration file for the prior settings'
        )
    p.add_argument(
        '-o', '--out', type=str, required=True,
        help='output prior file'
        )
    p.add_argument(
        '-k', '--kind', choices=('ctr', 'joint'), default='ctr',
        help='univariate CTR prior or bivariate CTR/CVR prior'
        )
    p.add_argument(
        '-n', '--n-components', type=int, default=None,
        help='number of mixture components'
        )
    p.add_argument(
        '--seed', type=int, default=None,
        help='root random seed'
        )
    p.add_argument(
        '-q', '--quiet', action='store_true',
        help="don't report progress in terminal"
        )
    p.set_defaults(func=execute)


def execute(args, parser):
    from denoisebid.sweep import fit_prior_files
    from .common import load_config, start_logging, stop_logging

    cfg = load_config(args)
    if args.n_components is not None:
        cfg.set('prior:k_%s' % args.kind, args.n_components)
    handlers = start_logging(args)
    try:
        fit_prior_files(cfg, args.csv, args.out, kind=args.kind)
    finally:
        stop_logging(handlers)
