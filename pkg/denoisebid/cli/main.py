"""Entry point for denoisebid command line interface"""

import argparse
import logging
import sys
import multiprocessing

# These can't be relative imports on Windows because of the hack
# in main() for multiprocessing.freeze_support()
from denoisebid.cli import help
from denoisebid.cli import test

from denoisebid.cli import generate
from denoisebid.cli import sweep
from denoisebid.cli import ingest
from denoisebid.cli import fit_prior

# exit statuses
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def exit_status(err):
    """Map an exception raised by a command to the process exit status."""
    from denoisebid.auctionlog import AuctionLogError
    from denoisebid.bidding import SolverError
    from denoisebid.config import ConfigError
    from denoisebid.coremath import DomainError
    from denoisebid.priors import FitError

    if isinstance(err, ConfigError):
        return EXIT_CONFIG
    if isinstance(err, (AuctionLogError, OSError)):
        return EXIT_DATA
    if isinstance(err, (DomainError, FitError, SolverError,
                        ArithmeticError)):
        return EXIT_NUMERICAL
    return None


def main():
    if sys.platform.startswith('win'):
        # Hack for multiprocessing.freeze_support() to work from a
        # setuptools-generated entry point.
        if __name__ != "__main__":
            sys.modules["__main__"] = sys.modules[__name__]
        multiprocessing.freeze_support()

    if len(sys.argv) == 1:
        sys.argv.append('-h')

    p = argparse.ArgumentParser(
        description='Bayesian denoising of CTR/CVR predictions for '
                    'constrained autobidding'
    )
    p.add_argument(
        "--debug",
        action="store_true",
        help='verbose reporting',
    )
    sub_parsers = p.add_subparsers(
        metavar='command',
        dest='cmd',
    )

    help.configure_parser(sub_parsers)
    test.configure_parser(sub_parsers)

    generate.configure_parser(sub_parsers)
    sweep.configure_parser(sub_parsers)
    ingest.configure_parser(sub_parsers)
    fit_prior.configure_parser(sub_parsers)

    try:
        import argcomplete
        argcomplete.autocomplete(p)
    except ImportError:
        pass

    args = p.parse_args()

    try:
        args.func(args, p)
    except Exception as err:
        status = exit_status(err)
        if status is None:
            raise
        logging.getLogger('denoisebid').error('%s: %s',
                                              err.__class__.__name__, err)
        print('error: %s' % err, file=sys.stderr)
        sys.exit(status)


if __name__ == '__main__':
    main()
