descr = 'Writes synthetic campaigns as auction-log CSV files'
example = """
examples:
    denoisebid generate --config experiment.yml --out campaigns/
    denoisebid generate --seed 3 --inject --sigma-ctr-grid 0.5 --out noisy/
"""


def configure_parser(sub_parsers):
    from argparse import RawDescriptionHelpFormatter

    from .common import add_config_arguments

    p = sub_parsers.add_parser(
        'generate', description=descr, help=descr, epilog=example,
        formatter_class=RawDescriptionHelpFormatter
        )
    add_config_arguments(p, sweep=False)
    p.add_argument(
        '--inject', action='store_true',
        help='apply the first noise point of the configured grid'
        )
    p.set_defaults(func=execute)


def execute(args, parser):
    import logging

    from denoisebid.sweep import generate_campaigns
    from .common import load_config, start_logging, stop_logging

    cfg = load_config(args)
    handlers = start_logging(args)
    logger = logging.getLogger('denoisebid')

    logger.info('=== begin generate ===')
    generate_campaigns(cfg, output_dir=args.out, inject=args.inject)
    logger.info('=== end generate ===')
    stop_logging(handlers)
