"""Command to run tests"""


descr = 'runs the denoisebid test suite'
example = """
examples:
    denoisebid test --verbose
    DENOISEBID_LONG_TESTS=1 denoisebid test
"""


def configure_parser(sub_parsers):
    from argparse import RawDescriptionHelpFormatter

    p = sub_parsers.add_parser(
        'test', description=descr, help=descr, epilog=example,
        formatter_class=RawDescriptionHelpFormatter
        )
    p.set_defaults(func=execute)

    p.add_argument(
        '-v', '--verbose', action='store_true',
        help="report detailed results in terminal"
        )


def execute(args, parser):
    import os
    import unittest

    import denoisebid

    top = os.path.dirname(os.path.dirname(denoisebid.__file__))
    suite = unittest.TestLoader().discover(
        os.path.dirname(denoisebid.__file__), top_level_dir=top
    )
    result = unittest.TextTestRunner(verbosity=args.verbose + 1).run(suite)
    if not result.wasSuccessful():
        raise SystemExit(1)
