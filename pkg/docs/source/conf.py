# noqa


# Sphinx configuration for the floquetmag documentation.
# See https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

sys.path.insert(0, os.path.abspath("../../"))

# -- Project information -----------------------------------------------------

project = "floquetmag"
copyright = "2022, The floquetmag authors"
author = "The floquetmag authors"


# -- General configuration ---------------------------------------------------

extensions = ["sphinx.ext.autodoc", "sphinx.ext.mathjax"]

templates_path = ["_templates"]

exclude_patterns = []

# Keep the signatures readable; the modules use postponed annotations.
autodoc_typehints = "description"


# -- Options for HTML output -------------------------------------------------

html_theme = "alabaster"
