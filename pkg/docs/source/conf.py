#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# greendc documentation build configuration file
#
# Only the values differing from the Sphinx defaults are set here.

import os
import sys

# the sources are documented from the `src` layout, without installing the package
sys.path.insert(0, os.path.abspath('../../src'))

import greendc


# -- General configuration ------------------------------------------------

extensions = [
    'autoapi.extension',
    'sphinx.ext.napoleon',
    'sphinx.ext.doctest',
    'sphinx.ext.todo',
]

autoapi_type = 'python'
autoapi_dirs = ['../../src/greendc/']

doctest_global_setup = """
import greendc
"""

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'greendc'
copyright = '2020, Civodlu'
author = 'Civodlu'

# The short X.Y version and the full version, including alpha/beta/rc tags.
version = '.'.join(greendc.__version__.split('.')[:2])
release = greendc.__version__

language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
todo_include_todos = False


# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']
htmlhelp_basename = 'greendcdoc'


# -- Options for LaTeX, manual page and Texinfo output ---------------------

latex_elements = {}
latex_documents = [
    (master_doc, 'greendc.tex', 'greendc Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'greendc', 'greendc Documentation', [author], 1)
]

texinfo_documents = [
    (master_doc, 'greendc', 'greendc Documentation', author, 'greendc',
     'Profit maximization for geographically dispersed green data centers.', 'Miscellaneous'),
]
