# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys
sys.path.insert(0, os.path.abspath('../../'))


# -- Project information -----------------------------------------------------

project = 'retrialqis'
copyright = '2026, Athanasios Anastasiou'
author = 'Athanasios Anastasiou'


# -- General configuration ---------------------------------------------------

extensions = ["sphinx.ext.autodoc",
              "sphinx.ext.mathjax",
]

templates_path = ['_templates']
exclude_patterns = []


# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_static_path = ['_static']

numfig = True
