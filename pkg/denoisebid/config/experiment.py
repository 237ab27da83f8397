import logging

import numpy as np

from denoisebid import constants as const

from .config import Config, ConfigError


logger = logging.getLogger('denoisebid.config')

DEFAULT_STRATEGIES = {
    'ctr_only': ['non_robust', 'denoise_ctr_only', 'denoise_ctr_only_normal'],
    'joint': ['non_robust', 'denoise_joint', 'denoise_joint_normal'],
    'empirical': ['non_robust', 'denoise_joint', 'denoise_joint_normal'],
}


def _positive_float(key, val, allow_zero=False):
    try:
        val = float(val)
    except (TypeError, ValueError):
        raise ConfigError('"%s": expected a number, got %r' % (key, val))
    if not np.isfinite(val) or val < 0 or (val == 0 and not allow_zero):
        raise ConfigError('"%s": must be %s, got %s'
                          % (key, '>= 0' if allow_zero else '> 0', val))
    return val


class ConstraintsConfig(Config):
    """Budget and target CPC as fractions in (0, 1] of campaign totals."""

    def _factor(self, key, default):
        temp = _positive_float(key, self._cfg.get(key, default))
        if temp > 1:
            raise ConfigError('"%s": must be <= 1, got %s' % (key, temp))
        return temp

    @property
    def k_budget(self):
        return self._factor('constraints:k_budget', const.default_k_budget)

    @property
    def k_cpc(self):
        return self._factor('constraints:k_cpc', const.default_k_cpc)

    def factors(self):
        from denoisebid.simulation import ConstraintFactors

        return ConstraintFactors(self.k_budget, self.k_cpc)


class NoiseConfig(Config):
    """Noise standard deviation grids in logit units."""

    def _grid(self, name, default):
        key = 'noise:%s' % name
        temp = self._cfg.get(key, default)
        if isinstance(temp, dict):
            try:
                start = _positive_float(key + ':start', temp['start'])
                stop = _positive_float(key + ':stop', temp['stop'])
                num = int(temp['num'])
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(
                    '"%s": log-spaced grids need start, stop and num (%s)'
                    % (key, e)
                )
            if num < 1:
                raise ConfigError('"%s:num": must be >= 1' % key)
            grid = np.logspace(np.log10(start), np.log10(stop), num)
        else:
            if isinstance(temp, (int, float)):
                temp = [temp]
            grid = np.array(
                [_positive_float(key, v, allow_zero=True) for v in temp]
            )
        if len(grid) == 0:
            raise ConfigError('"%s": empty grid' % key)
        return grid

    @property
    def sigma_ctr(self):
        return self._grid('sigma_ctr', const.default_sigma_grid)

    @property
    def sigma_cvr(self):
        return self._grid('sigma_cvr', const.default_sigma_grid)

    @property
    def correlation(self):
        temp = float(self._cfg.get('noise:correlation', 0.))
        if not abs(temp) < 1:
            raise ConfigError('"noise:correlation": must lie in (-1, 1)')
        return temp

    def points(self, mode):
        """(sigma_ctr, sigma_cvr) pairs swept in ``mode``."""
        if mode == 'ctr_only':
            return [(float(s), 0.) for s in self.sigma_ctr]
        elif mode == 'joint':
            return [(float(a), float(b))
                    for a in self.sigma_ctr for b in self.sigma_cvr]
        raise ConfigError('mode "%s" has no noise grid' % mode)


class PriorConfig(Config):

    @property
    def k_ctr(self):
        return self._n_components('prior:k_ctr')

    @property
    def k_joint(self):
        return self._n_components('prior:k_joint')

    def _n_components(self, key):
        temp = self._cfg.get(key, 3)
        if isinstance(temp, bool) or not isinstance(temp, int) or temp < 1:
            raise ConfigError('"%s": must be an integer >= 1, got %r'
                              % (key, temp))
        return temp

    @property
    def max_iterations(self):
        temp = self._cfg.get('prior:max_iterations',
                             const.default_max_iterations)
        if not isinstance(temp, int) or temp < 1:
            raise ConfigError('"prior:max_iterations": must be >= 1')
        return temp

    @property
    def tolerance(self):
        key = 'prior:tolerance'
        return _positive_float(
            key, self._cfg.get(key, const.default_loglik_tolerance)
        )

    @property
    def restarts(self):
        temp = self._cfg.get('prior:restarts', const.default_restarts)
        if not isinstance(temp, int) or temp < 1:
            raise ConfigError('"prior:restarts": must be >= 1')
        return temp

    @property
    def subsample(self):
        temp = self._cfg.get('prior:subsample', const.default_subsample)
        if not isinstance(temp, int) or temp < 1:
            raise ConfigError('"prior:subsample": must be >= 1')
        return temp

    @property
    def shared(self):
        """fit one prior per noise point on the pooled campaigns"""
        return bool(self._cfg.get('prior:shared', False))

    def fit_config(self, n_components, seed=None):
        from denoisebid.priors import FitConfig

        return FitConfig(
            n_components,
            max_iterations=self.max_iterations,
            loglik_tolerance=self.tolerance,
            restarts=self.restarts,
            rng_seed=seed,
        )


class EvaluationConfig(Config):

    @property
    def strategies(self):
        from denoisebid.bidding import STRATEGY_NAMES

        temp = self._cfg.get('evaluation:strategies', None)
        if temp is None:
            temp = DEFAULT_STRATEGIES[self._cfg.mode]
        if isinstance(temp, str):
            temp = [s.strip() for s in temp.split(',') if s.strip()]
        bad = [s for s in temp if s not in STRATEGY_NAMES]
        if bad or not temp:
            raise ConfigError(
                '"evaluation:strategies": unknown %s; choose from %s'
                % (bad, ', '.join(STRATEGY_NAMES))
            )
        # keep order, drop repeats
        return list(dict.fromkeys(temp))

    @property
    def quadrature_order(self):
        temp = self._cfg.get('evaluation:quadrature_order',
                             const.default_quadrature_order)
        if isinstance(temp, bool) or not isinstance(temp, int) \
                or not 3 <= temp <= 10:
            raise ConfigError(
                '"evaluation:quadrature_order": must be an integer in '
                '[3, 10], got %r' % (temp, )
            )
        return temp

    @property
    def bid_cap_factor(self):
        key = 'evaluation:bid_cap_factor'
        return _positive_float(
            key, self._cfg.get(key, const.default_bid_cap_factor)
        )

    @property
    def solver_tolerance(self):
        key = 'evaluation:solver_tolerance'
        return _positive_float(key, self._cfg.get(key, 1e-6))
