# Sphinx configuration for the cifeedback API reference.
import os
import sys

sys.path.insert(0, os.path.abspath("../.."))

import sphinx_glpi_theme  # noqa: E402

project = "cifeedback"
copyright = "2026, cifeedback developers"
author = "cifeedback developers"
release = "0.1.0"

extensions = ["sphinx.ext.autodoc", "sphinx.ext.mathjax", "sphinx.ext.napoleon"]
napoleon_google_docstring = True
napoleon_numpy_docstring = False
autodoc_member_order = "bysource"

templates_path = ["_templates"]
exclude_patterns = []

html_theme = "glpi"
html_theme_path = sphinx_glpi_theme.get_html_themes_path()
html_static_path = ["_static"]
