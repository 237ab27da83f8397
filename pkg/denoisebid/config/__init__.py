import yaml

from . import root
from .config import Config, ConfigError, merge_dicts


"""
The module-level open() shadows the builtin, which is kept as open_file().
"""
open_file = open


def open(file_name=None):
    """
    Reads configuration settings from a yaml file.

    Returns a list of configuration objects, one for each document section in
    the file.  Every document after the first inherits from the first.
    """
    if file_name is None:
        return [root.RootConfig({})]

    with open_file(file_name) as f:
        res = []
        for cfg in yaml.load_all(f, Loader=yaml.SafeLoader):
            if cfg is None:
                cfg = {}
            if not isinstance(cfg, dict):
                raise ConfigError(
                    '%s: each document must be a mapping' % file_name
                )
            if res:
                res.append(merge_dicts(res[0], cfg))
            else:
                res.append(cfg)
        if not res:
            res.append({})
        return [root.RootConfig(i) for i in res]


def save(config_list, file_name):
    res = [cfg._cfg for cfg in config_list]

    with open_file(file_name, 'w') as f:
        if len(res) > 1:
            yaml.safe_dump_all(res, f)
        else:
            yaml.safe_dump(res[0], f)
