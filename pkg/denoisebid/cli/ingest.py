descr = 'Evaluates strategies on logged predictions with their variances'
example = """
examples:
    denoisebid ingest --config criteo.yml --out uplift.csv
    denoisebid ingest logs/ --k-cpc 0.3
"""


def configure_parser(sub_parsers):
    from argparse import RawDescriptionHelpFormatter

    from .common import add_config_arguments

    p = sub_parsers.add_parser(
        'ingest', description=descr, help=descr, epilog=example,
        formatter_class=RawDescriptionHelpFormatter
        )
    p.add_argument(
        'path', type=str, nargs='?', default=None,
        help='auction-log CSV file or directory (overrides dataset:path)'
        )
    add_config_arguments(p)
    p.set_defaults(func=execute)


def execute(args, parser):
    import logging

    from denoisebid.sweep import run_ingest
    from .common import load_config, start_logging, stop_logging

    cfg = load_config(args)
    cfg.set('dataset:source', 'csv')
    cfg.set('mode', 'empirical')
    if args.path is not None:
        cfg.set('dataset:path', args.path)
    if args.out is not None:
        cfg.output = args.out
    handlers = start_logging(args, cfg, 'ingest')
    logger = logging.getLogger('denoisebid')

    logger.info('=== begin ingest ===')
    try:
        run_ingest(cfg)
    finally:
        logger.info('=== end ingest ===')
        stop_logging(handlers)
