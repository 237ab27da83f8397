"""package init for denoisebid"""
import logging

try:
    from importlib.metadata import PackageNotFoundError, version
except ImportError:  # python < 3.8
    from importlib_metadata import PackageNotFoundError, version

# Release data
__author__ = 'denoisebid Development Team'
__license__ = 'BSD'

try:
    __version__ = version(__name__)
except PackageNotFoundError:
    # package is not installed
    __version__ = None

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())
