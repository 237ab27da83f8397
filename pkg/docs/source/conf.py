# -*- coding: utf-8 -*-
#
# denoisebid documentation build configuration file

import os

from denoisebid import __version__

ON_RTD = os.environ.get('READTHEDOCS', None) == 'True'

if __version__ is None:
    __version__ = 'dev'

extensions = [
    'sphinx.ext.todo',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'denoisebid'
copyright = u'denoisebid Development Team'

version = __version__.rsplit('-', 3)[0]
release = __version__

today_fmt = '%B %d, %Y'
exclude_patterns = []
pygments_style = 'sphinx'

html_theme = 'default'
html_last_updated_fmt = '%b %d, %Y'
htmlhelp_basename = 'denoisebiddoc'

man_pages = [
    ('index', 'denoisebid', u'denoisebid Documentation',
     [u'denoisebid Development Team'], 1)
]
