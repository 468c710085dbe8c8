"""Sphinx configuration for the posecast documentation."""

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(__file__, "..", "..", "..")))

_version = {}
with open(os.path.join(sys.path[0], "posecast", "__version__.py")) as f:
    exec(f.read(), _version)

project = "posecast"
copyright = "2021, posecast contributors"
author = "posecast contributors"
release = _version["__version__"]
version = ".".join(release.split(".")[:2])

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx_rtd_theme",
    "sphinx_copybutton",
]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "torch": ("https://pytorch.org/docs/stable", None),
}

# heavy or optional imports are not needed to render the API pages
autodoc_mock_imports = ["torchvision", "matplotlib"]
autodoc_typehints = "description"
autodoc_default_options = {
    "members": True,
    "undoc-members": True,
    "show-inheritance": True,
    "member-order": "bysource",
    "exclude-members": "__dict__,__weakref__,__module__",
}

language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
html_theme = "sphinx_rtd_theme"
master_doc = "index"
pygments_style = "sphinx"
