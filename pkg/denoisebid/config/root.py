import os
import logging

import psutil

from .config import Config, ConfigError
from .dataset import DatasetConfig
from .experiment import ConstraintsConfig, NoiseConfig, PriorConfig, \
    EvaluationConfig

logger = logging.getLogger('denoisebid.config')

MODES = ('ctr_only', 'joint', 'empirical')


def _cpu_count():
    return psutil.cpu_count(logical=True) or 1


class RootConfig(Config):

    @property
    def analysis_name(self):
        return str(self.get('analysis_name', default='analysis'))

    @analysis_name.setter
    def analysis_name(self, val):
        self.set('analysis_name', val)

    @property
    def analysis_id(self):
        return '_'.join(
            [self.analysis_name.strip().replace(' ', '-'), self.mode]
        )

    @property
    def dataset(self):
        return DatasetConfig(self)

    @property
    def constraints(self):
        return ConstraintsConfig(self)

    @property
    def noise(self):
        return NoiseConfig(self)

    @property
    def prior(self):
        return PriorConfig(self)

    @property
    def evaluation(self):
        return EvaluationConfig(self)

    @property
    def seed(self):
        temp = self.get('seed', default=0)
        if isinstance(temp, bool) or not isinstance(temp, int) or temp < 0:
            raise ConfigError('"seed": must be an integer >= 0, got %r'
                              % (temp, ))
        return temp

    @seed.setter
    def seed(self, val):
        self.set('seed', int(val))

    @property
    def mode(self):
        temp = self.get('mode', default='ctr_only')
        if temp not in MODES:
            raise ConfigError('"mode": must be one of %s, got %r'
                              % (', '.join(MODES), temp))
        return temp

    @mode.setter
    def mode(self, val):
        self.set('mode', val)

    @property
    def multiprocessing(self):
        # determine number of processes to run in parallel
        multiproc = self.get('multiprocessing', default='all')
        ncpus = _cpu_count()
        if multiproc == 'all':
            res = ncpus
        elif multiproc == 'half':
            res = max(ncpus // 2, 1)
        elif isinstance(multiproc, int) and not isinstance(multiproc, bool):
            if multiproc >= 0:
                if multiproc > ncpus:
                    logger.warning(
                        'Requested %s processes, %d available',
                        multiproc, ncpus
                    )
                    res = ncpus
                else:
                    res = multiproc if multiproc else 1
            else:
                temp = ncpus + multiproc
                if temp < 1:
                    logger.warning(
                        'Cannot use less than 1 process, requested %d of %d',
                        temp, ncpus
                    )
                    res = 1
                else:
                    res = temp
        else:
            logger.warning(
                "Invalid value %s for multiprocessing, using all cores",
                multiproc
            )
            res = ncpus
        return res

    @multiprocessing.setter
    def multiprocessing(self, val):
        if val in ('half', 'all'):
            self.set('multiprocessing', val)
        elif isinstance(val, int) and val >= -_cpu_count():
            self.set('multiprocessing', int(val))
        else:
            raise ConfigError(
                '"multiprocessing": must be "all", "half" or an integer '
                '>= -%d, got %s' % (_cpu_count(), val)
            )

    @property
    def working_dir(self):
        try:
            temp = self.get('working_dir')
            if not os.path.exists(temp):
                raise IOError(
                    '"working_dir": "%s" does not exist' % temp
                )
            return temp
        except ConfigError:
            temp = os.getcwd()
            was_dirty = self.dirty
            self.working_dir = temp
            if not was_dirty:
                self._dirty = False
            logger.info(
                '"working_dir" not specified, defaulting to "%s"', temp
            )
            return temp

    @working_dir.setter
    def working_dir(self, val):
        val = os.path.abspath(val)
        if not os.path.isdir(val):
            raise IOError('"working_dir": "%s" does not exist' % val)
        self.set('working_dir', val)

    @property
    def output(self):
        """Results CSV path; relative paths live under ``working_dir``."""
        temp = self.get(
            'output', default='%s_results.csv' % self.analysis_name
        )
        if not os.path.isabs(temp):
            temp = os.path.join(self.working_dir, temp)
        return temp

    @output.setter
    def output(self, val):
        self.set('output', val)
