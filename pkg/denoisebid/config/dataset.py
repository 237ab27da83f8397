import logging
import os

import numpy as np

from denoisebid import constants as const
from denoisebid.coremath import DomainError
from denoisebid.priors import GmmPrior1D

from .config import Config, ConfigError


logger = logging.getLogger('denoisebid.config')

SOURCES = ('synthetic', 'prices', 'csv')


def _positive_int(key, val, minimum=1):
    if isinstance(val, bool) or not isinstance(val, int) or val < minimum:
        raise ConfigError('"%s": must be an integer >= %d, got %r'
                          % (key, minimum, val))
    return val


class DatasetConfig(Config):
    """Where campaigns come from and how synthetic ones are drawn."""

    @property
    def source(self):
        temp = self._cfg.get('dataset:source', 'synthetic')
        if temp not in SOURCES:
            raise ConfigError('"dataset:source": must be one of %s, got %r'
                              % (', '.join(SOURCES), temp))
        return temp

    @property
    def path(self):
        """Input file or directory of per-campaign CSV files."""
        key = 'dataset:path'
        temp = self._cfg.get(key, None)
        if temp is None:
            if self.source != 'synthetic':
                raise ConfigError('"%s" is required for source "%s"'
                                  % (key, self.source))
            return temp
        if not os.path.isabs(temp):
            temp = os.path.join(self._cfg.working_dir, temp)
        if not os.path.exists(temp):
            raise IOError('"%s": "%s" does not exist' % (key, temp))
        return temp

    @property
    def n_campaigns(self):
        key = 'dataset:n_campaigns'
        return _positive_int(
            key, self._cfg.get(key, const.default_n_campaigns)
        )

    @property
    def n_auctions(self):
        key = 'dataset:n_auctions'
        return _positive_int(
            key, self._cfg.get(key, const.default_n_auctions)
        )

    @property
    def wp_sigma(self):
        temp = float(self._cfg.get('dataset:wp_sigma',
                                   const.default_wp_sigma))
        if temp < 0:
            raise ConfigError('"dataset:wp_sigma": must be >= 0')
        return temp

    @property
    def wp_mu(self):
        """log-normal location; median winning price is exp(wp_mu)"""
        default = np.log(const.default_wp_median_price) - self.wp_sigma
        return float(self._cfg.get('dataset:wp_mu', default))

    def _mixture(self, name, default):
        key = 'dataset:%s' % name
        temp = self._cfg.get(key, default)
        try:
            return GmmPrior1D.from_sigmas(
                temp['weights'], temp['means'], temp['sigmas']
            )
        except (KeyError, TypeError) as e:
            raise ConfigError('"%s": needs weights, means and sigmas (%s)'
                              % (key, e))
        except (DomainError, ValueError) as e:
            raise ConfigError('"%s": %s' % (key, e))

    @property
    def ctr_prior(self):
        """generating mixture over logit-CTR"""
        return self._mixture('ctr_prior', const.synthetic_ctr_prior)

    @property
    def cvr_prior(self):
        """generating mixture over logit-CVR"""
        return self._mixture('cvr_prior', const.synthetic_cvr_prior)

    @property
    def realized_outcomes(self):
        return bool(self._cfg.get('dataset:realized_outcomes', False))

    def synthetic_params(self):
        """SyntheticParams for campaign generation."""
        from denoisebid.simulation import SyntheticParams

        return SyntheticParams(
            n_auctions=self.n_auctions,
            wp_mu=self.wp_mu,
            wp_sigma=self.wp_sigma,
            ctr_prior=self.ctr_prior,
            cvr_prior=self.cvr_prior,
            factors=self._cfg.constraints.factors(),
        )
