# Configuration file for the Sphinx documentation builder.

import os
import sys

sys.path.insert(0, os.path.abspath('../'))

import pathharden  # noqa: E402

project = 'pathharden'
author = 'pathharden developers'

VERSION = pathharden.__version__
version = '.'.join(VERSION.split('.')[:2])
release = VERSION

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.doctest',
    'sphinx.ext.todo',
    'sphinx.ext.mathjax',
]

autosummary_generate = True
templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'

html_theme = 'sphinx_rtd_theme'
todo_include_todos = True
htmlhelp_basename = 'pathhardendoc'
