# -*- coding: utf-8 -*-
"""Comma-separated auction logs: one campaign per file, one auction per row.

Columns::

    auction_id,wp,ctr_true,cvr_true,ctr_hat,cvr_hat,
    var_logit_ctr,var_logit_cvr,cov_logit,click,conversion

Only ``wp``, ``ctr_hat`` and ``cvr_hat`` are required; columns may come in
any order, unknown columns are ignored and empty fields read as missing.
"""
import logging
import os

import numpy as np

from denoisebid.simulation import Campaign

logger = logging.getLogger(__name__)

LOG_COLUMNS = (
    'auction_id', 'wp', 'ctr_true', 'cvr_true', 'ctr_hat', 'cvr_hat',
    'var_logit_ctr', 'var_logit_cvr', 'cov_logit', 'click', 'conversion',
)
REQUIRED_COLUMNS = ('wp', 'ctr_hat', 'cvr_hat')
VARIANCE_COLUMNS = ('var_logit_ctr', 'var_logit_cvr')

_numeric_columns = LOG_COLUMNS[1:]
_defaults = dict(var_logit_ctr=0., var_logit_cvr=0., cov_logit=0.)


class AuctionLogError(ValueError):
    """Malformed auction log; ``line`` is the 1-based file line if known."""

    def __init__(self, fname, message, line=None):
        self.fname = fname
        self.line = line
        where = fname if line is None else '%s:%d' % (fname, line)
        super(AuctionLogError, self).__init__('%s: %s' % (where, message))


def _read_table(fname):
    with open(fname, 'r') as f:
        lines = f.read().splitlines()
    numbered = [(i + 1, l) for i, l in enumerate(lines)
                if l.strip() and not l.lstrip().startswith('#')]
    if not numbered:
        raise AuctionLogError(fname, "empty file")
    _, header = numbered[0]
    names = [n.strip().lower() for n in header.split(',')]
    missing = [c for c in REQUIRED_COLUMNS if c not in names]
    if missing:
        raise AuctionLogError(fname, "missing column(s) %s"
                              % ', '.join(missing), line=numbered[0][0])
    rows = []
    lineno = []
    for i, line in numbered[1:]:
        fields = [s.strip() for s in line.split(',')]
        if len(fields) != len(names):
            raise AuctionLogError(
                fname, "expected %d fields, got %d"
                % (len(names), len(fields)), line=i
            )
        rows.append(fields)
        lineno.append(i)
    if not rows:
        raise AuctionLogError(fname, "no auctions")
    return names, np.array(rows, dtype=str), np.array(lineno)


def _to_float(fname, strings, lineno, name):
    strings = np.where(strings == '', 'nan', strings)
    try:
        return strings.astype(float)
    except ValueError:
        for s, i in zip(strings, lineno):
            try:
                float(s)
            except ValueError:
                raise AuctionLogError(
                    fname, "column '%s': cannot parse '%s'" % (name, s),
                    line=int(i)
                )
        raise


def read_auction_log(fname, campaign_id=None, require_variances=False):
    """
    Read one campaign from an auction log.

    Parameters
    ----------
    fname : str
        Path to the CSV file.
    campaign_id : str, optional
        Defaults to the file's base name without extension.
    require_variances : bool, optional
        Demand populated logit noise variance columns.

    Returns
    -------
    Campaign
        Constraints are left unset.

    Raises
    ------
    AuctionLogError
        On structural errors or invalid values, with the offending line.
    """
    if campaign_id is None:
        campaign_id = os.path.splitext(os.path.basename(fname))[0]
    names, table, lineno = _read_table(fname)
    cols = {}
    for name in _numeric_columns:
        if name in names:
            cols[name] = _to_float(
                fname, table[:, names.index(name)], lineno, name
            )

    def check(name, valid):
        bad = np.flatnonzero(~valid)
        if len(bad):
            raise AuctionLogError(
                fname, "invalid %s value '%s'"
                % (name, table[bad[0], names.index(name)]),
                line=int(lineno[bad[0]])
            )

    for name in REQUIRED_COLUMNS:
        check(name, np.isfinite(cols[name]))
    check('wp', cols['wp'] > 0)
    for name in ('ctr_true', 'cvr_true', 'ctr_hat', 'cvr_hat'):
        if name in cols:
            arr = cols[name]
            check(name, np.isnan(arr) | ((arr > 0) & (arr < 1)))
    for name in VARIANCE_COLUMNS:
        if name in cols:
            arr = cols[name]
            if require_variances:
                check(name, np.isfinite(arr))
            check(name, np.isnan(arr) | (arr >= 0))
            cols[name] = np.where(np.isnan(arr), 0., arr)
        elif require_variances:
            raise AuctionLogError(fname, "missing column '%s'" % name)
    if 'cov_logit' in cols:
        cols['cov_logit'] = np.where(
            np.isnan(cols['cov_logit']), 0., cols['cov_logit'])
    for name in ('click', 'conversion'):
        if name in cols:
            check(name, np.isnan(cols[name]) | (cols[name] >= 0))

    args = dict(_defaults)
    args.update(cols)
    args.setdefault('ctr_true', None)
    args.setdefault('cvr_true', None)
    try:
        campaign = Campaign(campaign_id, **args)
    except ValueError as e:
        raise AuctionLogError(fname, str(e))
    logger.debug("read %d auctions from %s", len(campaign), fname)
    return campaign


def _format(x):
    if np.isnan(x):
        return ''
    return '%.17g' % x


def write_auction_log(campaign, fname):
    """Write a campaign in the auction-log format (17 significant digits)."""
    with open(fname, 'w') as f:
        print(','.join(LOG_COLUMNS), file=f)
        data = np.column_stack(
            [getattr(campaign, c) for c in _numeric_columns]
        )
        for t, row in enumerate(data):
            print(','.join([str(t)] + [_format(x) for x in row]), file=f)
    logger.debug("wrote %d auctions to %s", len(campaign), fname)


def list_auction_logs(path):
    """CSV files under ``path`` (a file or a directory), sorted."""
    if os.path.isfile(path):
        return [path]
    if not os.path.isdir(path):
        raise OSError("'%s' is neither a file nor a directory" % path)
    return sorted(
        os.path.join(path, f) for f in os.listdir(path)
        if f.lower().endswith('.csv')
    )
