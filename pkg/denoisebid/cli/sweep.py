descr = 'Runs a noise sweep and writes the results CSV'
example = """
examples:
    denoisebid sweep --config experiment.yml
    denoisebid sweep --mode joint --sigma-ctr-grid 0.1,1,3 \\
        --sigma-cvr-grid 0.1,1,3 --seed 3 --out results.csv
"""


def configure_parser(sub_parsers):
    from argparse import RawDescriptionHelpFormatter

    from .common import add_config_arguments

    p = sub_parsers.add_parser(
        'sweep', description=descr, help=descr, epilog=example,
        formatter_class=RawDescriptionHelpFormatter
        )
    add_config_arguments(p)
    p.add_argument(
        '-p', '--profile', action='store_true',
        help='runs the sweep with cProfile enabled',
        )
    p.set_defaults(func=execute)


def execute(args, parser):
    import logging

    from denoisebid.sweep import run_sweep
    from .common import load_config, start_logging, stop_logging

    cfg = load_config(args)
    if args.out is not None:
        cfg.output = args.out
    handlers = start_logging(args, cfg, 'sweep')
    logger = logging.getLogger('denoisebid')

    logger.info('=== begin sweep ===')
    logger.info('*** begin analysis "%s" ***', cfg.analysis_name)

    if args.profile:
        import cProfile as profile
        import pstats
        from io import StringIO

        pr = profile.Profile()
        pr.enable()

    try:
        run_sweep(cfg)
    finally:
        if args.profile:
            pr.disable()
            s = StringIO()
            ps = pstats.Stats(pr, stream=s).sort_stats('cumulative')
            ps.print_stats(50)
            logger.info('%s', s.getvalue())

        logger.info('*** end analysis "%s" ***', cfg.analysis_name)
        logger.info('=== end sweep ===')
        stop_logging(handlers)
